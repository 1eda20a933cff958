#include "splitdmd/io.hpp"

#include "splitdmd/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace splitdmd {

namespace {

// Reads keys from a JSON object into existing fields, remembering which keys
// were consumed so that leftovers can be reported.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string what) : j_(j), what_(std::move(what))
    {
        if (!j_.is_object()) {
            throw ConfigError(what_ + " must be a JSON object");
        }
    }

    template <typename T>
    void get(const char* key, T& field)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) {
            return;
        }
        try {
            field = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(what_ + "." + key + ": " + e.what());
        }
    }

    void finish() const
    {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError(what_ + ": unknown key '" + item.key() + "'");
            }
        }
    }

private:
    const json& j_;
    std::string what_;
    std::set<std::string> seen_;
};

json complex_to_json(const Eigen::MatrixXcd& m)
{
    json real = json::array();
    json imag = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json rr = json::array();
        json ri = json::array();
        for (Index k = 0; k < m.cols(); ++k) {
            rr.push_back(m(i, k).real());
            ri.push_back(m(i, k).imag());
        }
        real.push_back(std::move(rr));
        imag.push_back(std::move(ri));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"real", real}, {"imag", imag}};
}

Eigen::MatrixXcd complex_from_json(const json& j)
{
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const json& real = j.at("real");
    const json& imag = j.at("imag");
    if (real.size() != static_cast<std::size_t>(rows) ||
        imag.size() != static_cast<std::size_t>(rows)) {
        throw IoError("complex array: plane sizes do not match rows");
    }
    Eigen::MatrixXcd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& rr = real.at(static_cast<std::size_t>(i));
        const json& ri = imag.at(static_cast<std::size_t>(i));
        if (rr.size() != static_cast<std::size_t>(cols) ||
            ri.size() != static_cast<std::size_t>(cols)) {
            throw IoError("complex array: row " + std::to_string(i) + " has the wrong length");
        }
        for (Index k = 0; k < cols; ++k) {
            m(i, k) = {rr.at(static_cast<std::size_t>(k)).get<double>(),
                       ri.at(static_cast<std::size_t>(k)).get<double>()};
        }
    }
    return m;
}

json vector_to_json(const Eigen::VectorXcd& v)
{
    json real = json::array();
    json imag = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        real.push_back(v(i).real());
        imag.push_back(v(i).imag());
    }
    return {{"real", real}, {"imag", imag}};
}

Eigen::VectorXcd vector_from_json(const json& j)
{
    const json& real = j.at("real");
    const json& imag = j.at("imag");
    if (real.size() != imag.size()) {
        throw IoError("complex vector: plane sizes differ");
    }
    Eigen::VectorXcd v(static_cast<Index>(real.size()));
    for (std::size_t i = 0; i < real.size(); ++i) {
        v(static_cast<Index>(i)) = {real[i].get<double>(), imag[i].get<double>()};
    }
    return v;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {})
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {})
{
    std::ifstream in(path, std::ios::in | mode);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return in;
}

constexpr char snapshot_magic[8] = {'S', 'P', 'D', 'M', 'D', 'S', 'N', 'P'};

void write_doubles(std::ostream& out, const double* data, Index count)
{
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * static_cast<Index>(sizeof(double))));
}

void read_doubles(std::istream& in, double* data, Index count, const std::string& name)
{
    in.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(count * static_cast<Index>(sizeof(double))));
    if (!in) {
        throw IoError(name + ": truncated snapshot payload");
    }
}

}  // namespace

void to_json(json& j, const KsConfig& cfg)
{
    j = {{"length", cfg.length},
         {"num_nodes", cfg.num_nodes},
         {"final_time", cfg.final_time},
         {"dt_out", cfg.dt_out},
         {"dt_int", cfg.dt_int},
         {"perturb_amplitude", cfg.perturb_amplitude},
         {"rng_seed", cfg.rng_seed},
         {"max_tail_energy", cfg.max_tail_energy}};
}

void from_json(const json& j, KsConfig& cfg)
{
    ObjectReader r(j, "ks");
    r.get("length", cfg.length);
    r.get("num_nodes", cfg.num_nodes);
    r.get("final_time", cfg.final_time);
    r.get("dt_out", cfg.dt_out);
    r.get("dt_int", cfg.dt_int);
    r.get("perturb_amplitude", cfg.perturb_amplitude);
    r.get("rng_seed", cfg.rng_seed);
    r.get("max_tail_energy", cfg.max_tail_energy);
    r.finish();
}

void to_json(json& j, const VarproConfig& cfg)
{
    j = {{"max_iters", cfg.max_iters},       {"tol_residual", cfg.tol_residual},
         {"tol_decrease", cfg.tol_decrease}, {"tol_gradient", cfg.tol_gradient},
         {"lambda_init", cfg.lambda_init},   {"lambda_down", cfg.lambda_down},
         {"lambda_up", cfg.lambda_up},       {"max_lambda", cfg.max_lambda}};
}

void from_json(const json& j, VarproConfig& cfg)
{
    ObjectReader r(j, "od");
    r.get("max_iters", cfg.max_iters);
    r.get("tol_residual", cfg.tol_residual);
    r.get("tol_decrease", cfg.tol_decrease);
    r.get("tol_gradient", cfg.tol_gradient);
    r.get("lambda_init", cfg.lambda_init);
    r.get("lambda_down", cfg.lambda_down);
    r.get("lambda_up", cfg.lambda_up);
    r.get("max_lambda", cfg.max_lambda);
    r.finish();
}

void to_json(json& j, const NsplitConfig& cfg)
{
    j = {{"eps_fraction", cfg.eps_fraction},
         {"delta_fraction", cfg.delta_fraction},
         {"max_iterations", cfg.max_iterations},
         {"initial_num_splits", cfg.initial_num_splits},
         {"num_x_tests", cfg.num_x_tests},
         {"rng_seed", cfg.rng_seed},
         {"consensus_threshold", cfg.consensus_threshold}};
    j["merge_tolerance"] = cfg.merge_tolerance ? json(*cfg.merge_tolerance) : json(nullptr);
}

void from_json(const json& j, NsplitConfig& cfg)
{
    ObjectReader r(j, "nsplit");
    r.get("eps_fraction", cfg.eps_fraction);
    r.get("delta_fraction", cfg.delta_fraction);
    r.get("max_iterations", cfg.max_iterations);
    r.get("initial_num_splits", cfg.initial_num_splits);
    r.get("num_x_tests", cfg.num_x_tests);
    r.get("rng_seed", cfg.rng_seed);
    r.get("consensus_threshold", cfg.consensus_threshold);
    json merge = nullptr;
    r.get("merge_tolerance", merge);
    if (merge.is_null()) {
        cfg.merge_tolerance.reset();
    } else if (merge.is_number()) {
        cfg.merge_tolerance = merge.get<double>();
    } else {
        throw ConfigError("nsplit.merge_tolerance must be a number or null");
    }
    r.finish();
}

void to_json(json& j, const SplitSet& splits)
{
    j = splits.lines();
}

void from_json(const json& j, SplitSet& splits)
{
    if (!j.is_array()) {
        throw ConfigError("split set must be a JSON array of times");
    }
    splits = SplitSet(j.get<std::vector<double>>());
}

void to_json(json& j, const DmdModel& model)
{
    j = {{"rank", model.rank()},
         {"dt", model.dt},
         {"t_start", model.t_start},
         {"cont_eigs", vector_to_json(model.cont_eigs)},
         {"amplitudes", vector_to_json(model.amplitudes)},
         {"modes", complex_to_json(model.modes)}};
}

void from_json(const json& j, DmdModel& model)
{
    try {
        model.dt = j.at("dt").get<double>();
        model.t_start = j.at("t_start").get<double>();
        model.cont_eigs = vector_from_json(j.at("cont_eigs"));
        model.amplitudes = vector_from_json(j.at("amplitudes"));
        model.modes = complex_from_json(j.at("modes"));
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed DMD model: ") + e.what());
    }
    const auto rank = j.at("rank").get<Index>();
    if (model.cont_eigs.size() != rank || model.amplitudes.size() != rank ||
        model.modes.cols() != rank) {
        throw IoError("DMD model arrays disagree with rank " + std::to_string(rank));
    }
}

void to_json(json& j, const SplitDmdModel& model)
{
    j = {{"splits", model.splits},
         {"method", std::string(to_string(model.method))},
         {"rank", model.rank},
         {"total_fit_time_seconds", model.total_fit_time_seconds},
         {"segmentation_time_seconds", model.segmentation_time_seconds},
         {"piece_fit_seconds", model.piece_fit_seconds},
         {"piece_stop_reasons", model.piece_stop_reasons},
         {"pieces", model.pieces}};
}

void from_json(const json& j, SplitDmdModel& model)
{
    try {
        model.splits = j.at("splits").get<SplitSet>();
        model.method = method_from_string(j.at("method").get<std::string>());
        model.rank = j.at("rank").get<Index>();
        model.total_fit_time_seconds = j.at("total_fit_time_seconds").get<double>();
        model.segmentation_time_seconds = j.value("segmentation_time_seconds", 0.0);
        model.piece_fit_seconds = j.value("piece_fit_seconds", std::vector<double>{});
        model.piece_stop_reasons =
            j.value("piece_stop_reasons", std::vector<std::string>{});
        model.pieces = j.at("pieces").get<std::vector<DmdModel>>();
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed split DMD model: ") + e.what());
    }
    if (model.pieces.size() != static_cast<std::size_t>(model.splits.num_intervals())) {
        throw IoError("split DMD model: piece count does not match the split set");
    }
}

json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& value)
{
    std::ofstream out = open_out(path);
    out << value.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void write_snapshots(const std::filesystem::path& path, const SnapshotMatrix& data,
                     const json& meta)
{
    data.validate();
    const std::string header =
        json{{"rows", data.num_nodes()}, {"cols", data.num_snapshots()}, {"meta", meta}}.dump();
    std::ofstream out = open_out(path, std::ios::binary);
    out.write(snapshot_magic, sizeof(snapshot_magic));
    const auto length = static_cast<std::uint64_t>(header.size());
    out.write(reinterpret_cast<const char*>(&length), sizeof(length));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_doubles(out, data.x_grid.data(), data.x_grid.size());
    write_doubles(out, data.t_grid.data(), data.t_grid.size());
    write_doubles(out, data.values.data(), data.values.size());
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

SnapshotMatrix read_snapshots(const std::filesystem::path& path, json* meta)
{
    std::ifstream in = open_in(path, std::ios::binary);
    char magic[sizeof(snapshot_magic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, snapshot_magic, sizeof(magic)) != 0) {
        throw IoError(path.string() + " is not a snapshot container");
    }
    std::uint64_t length = 0;
    in.read(reinterpret_cast<char*>(&length), sizeof(length));
    if (!in || length > (1u << 30)) {
        throw IoError(path.string() + ": bad header length");
    }
    std::string header(static_cast<std::size_t>(length), '\0');
    in.read(header.data(), static_cast<std::streamsize>(length));
    if (!in) {
        throw IoError(path.string() + ": truncated header");
    }
    json head;
    try {
        head = json::parse(header);
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    const auto rows = head.at("rows").get<Index>();
    const auto cols = head.at("cols").get<Index>();
    if (rows < 0 || cols < 0) {
        throw IoError(path.string() + ": negative dimensions");
    }
    SnapshotMatrix data;
    data.x_grid.resize(rows);
    data.t_grid.resize(cols);
    data.values.resize(rows, cols);
    read_doubles(in, data.x_grid.data(), rows, path.string());
    read_doubles(in, data.t_grid.data(), cols, path.string());
    read_doubles(in, data.values.data(), rows * cols, path.string());
    if (meta) {
        *meta = head.value("meta", json::object());
    }
    data.validate();
    return data;
}

void write_snapshots_csv(const std::filesystem::path& path, const SnapshotMatrix& data)
{
    std::ofstream out = open_out(path);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "x\\t";
    for (Index k = 0; k < data.num_snapshots(); ++k) {
        out << ',' << data.t_grid(k);
    }
    out << '\n';
    for (Index i = 0; i < data.num_nodes(); ++i) {
        out << data.x_grid(i);
        for (Index k = 0; k < data.num_snapshots(); ++k) {
            out << ',' << data.values(i, k);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

namespace {

std::vector<double> parse_csv_row(const std::string& line, bool skip_first_cell,
                                  const std::string& where)
{
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
        if (first && skip_first_cell) {
            first = false;
            continue;
        }
        first = false;
        try {
            std::size_t used = 0;
            cells.push_back(std::stod(cell, &used));
            if (used != cell.size() && cell.find_first_not_of(" \r", used) != std::string::npos) {
                throw std::invalid_argument(cell);
            }
        } catch (const std::logic_error&) {
            throw IoError(where + ": cannot parse '" + cell + "' as a number");
        }
    }
    return cells;
}

}  // namespace

SnapshotMatrix read_snapshots_csv(const std::filesystem::path& path)
{
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(path.string() + ": empty file");
    }
    const std::vector<double> times = parse_csv_row(line, true, path.string());
    std::vector<double> xs;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        std::vector<double> cells = parse_csv_row(line, false, path.string());
        if (cells.size() != times.size() + 1) {
            throw IoError(path.string() + ": row " + std::to_string(rows.size() + 1) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(times.size() + 1));
        }
        xs.push_back(cells.front());
        rows.emplace_back(cells.begin() + 1, cells.end());
    }
    SnapshotMatrix data;
    data.t_grid = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Index>(times.size()));
    data.x_grid = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Index>(xs.size()));
    data.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(times.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < times.size(); ++k) {
            data.values(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
        }
    }
    data.validate();
    return data;
}

void write_heatmap_csv(const std::filesystem::path& path, const Eigen::VectorXd& x_grid,
                       const Eigen::VectorXd& t_grid, const Eigen::MatrixXd& values)
{
    if (values.rows() != x_grid.size() || values.cols() != t_grid.size()) {
        throw ShapeError("heatmap values do not match the grids");
    }
    std::ofstream out = open_out(path);
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    out << "x,t,value\n";
    for (Index k = 0; k < t_grid.size(); ++k) {
        for (Index i = 0; i < x_grid.size(); ++i) {
            out << x_grid(i) << ',' << t_grid(k) << ',' << values(i, k) << '\n';
        }
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

}  // namespace splitdmd

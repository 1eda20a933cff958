#include "splitdmd/experiment.hpp"

#include "splitdmd/errors.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace splitdmd {

std::string_view to_string(ExperimentMethod method)
{
    switch (method) {
    case ExperimentMethod::dmd:
        return "dmd";
    case ExperimentMethod::od:
        return "od";
    case ExperimentMethod::split_dmd:
        return "split_dmd";
    case ExperimentMethod::split_od:
        return "split_od";
    }
    return "unknown";
}

ExperimentMethod experiment_method_from_string(std::string_view name)
{
    for (const auto m : {ExperimentMethod::dmd, ExperimentMethod::od, ExperimentMethod::split_dmd,
                         ExperimentMethod::split_od}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw ConfigError("unknown experiment method '" + std::string(name) +
                      "' (expected dmd, od, split_dmd or split_od)");
}

std::string_view to_string(SplitSource source)
{
    switch (source) {
    case SplitSource::automatic:
        return "auto";
    case SplitSource::explicit_lines:
        return "explicit";
    case SplitSource::shifted:
        return "shifted";
    }
    return "unknown";
}

SplitSource split_source_from_string(std::string_view name)
{
    for (const auto s : {SplitSource::automatic, SplitSource::explicit_lines, SplitSource::shifted}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw ConfigError("unknown split source '" + std::string(name) +
                      "' (expected auto, explicit or shifted)");
}

bool ExperimentSpec::is_split() const
{
    return method == ExperimentMethod::split_dmd || method == ExperimentMethod::split_od;
}

void ExperimentSpec::validate() const
{
    if (scenario_id.empty()) {
        throw ConfigError("scenario_id must not be empty");
    }
    ks.validate();
    od.validate();
    nsplit.validate();
    if (rank < 1) {
        throw ConfigError(scenario_id + ": rank must be positive");
    }
    if (timing_repeats < 1) {
        throw ConfigError(scenario_id + ": timing_repeats must be positive");
    }
    if (workers < 1) {
        throw ConfigError(scenario_id + ": workers must be positive");
    }
    if (is_split() && split_source != SplitSource::automatic && !lines) {
        throw ConfigError(scenario_id + ": " + std::string(to_string(split_source)) +
                          " splits need split lines");
    }
}

std::optional<SplitSet> ExperimentSpec::resolved_splits() const
{
    if (!is_split()) {
        return SplitSet::whole(0.0, ks.final_time);
    }
    switch (split_source) {
    case SplitSource::automatic:
        return std::nullopt;
    case SplitSource::explicit_lines:
        return *lines;
    case SplitSource::shifted:
        return shift_splits(*lines, shift_seconds);
    }
    return std::nullopt;
}

void to_json(json& j, const ExperimentSpec& spec)
{
    json splits = {{"source", std::string(to_string(spec.split_source))}};
    if (spec.lines) {
        splits["lines"] = *spec.lines;
    }
    if (spec.split_source == SplitSource::shifted) {
        splits["shift"] = spec.shift_seconds;
    }
    j = {{"scenario_id", spec.scenario_id},
         {"ks", spec.ks},
         {"rank", spec.rank},
         {"method", std::string(to_string(spec.method))},
         {"splits", splits},
         {"od", spec.od},
         {"nsplit", spec.nsplit},
         {"output_dir", spec.output_dir.string()},
         {"timing_repeats", spec.timing_repeats},
         {"include_segmentation_time", spec.include_segmentation_time},
         {"workers", spec.workers}};
}

namespace {

template <typename T>
void overlay(const json& j, const char* key, T& field, const std::string& where)
{
    const auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        field = it->template get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

// Applies the keys of a partial config object on top of an existing config.
template <typename Config>
void overlay_config(const json& j, const char* key, Config& cfg)
{
    const auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    json merged = cfg;
    if (!it->is_object()) {
        throw ConfigError(std::string(key) + " must be a JSON object");
    }
    for (const auto& item : it->items()) {
        merged[item.key()] = item.value();
    }
    cfg = merged.get<Config>();
}

}  // namespace

void from_json(const json& j, ExperimentSpec& spec)
{
    static const std::set<std::string> known = {
        "scenario_id", "ks",         "rank",           "method",
        "splits",      "od",         "nsplit",         "output_dir",
        "timing_repeats", "include_segmentation_time", "workers"};
    if (!j.is_object()) {
        throw ConfigError("scenario must be a JSON object");
    }
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) {
            throw ConfigError("scenario: unknown key '" + item.key() + "'");
        }
    }
    const std::string where = "scenario " + j.value("scenario_id", spec.scenario_id);
    overlay(j, "scenario_id", spec.scenario_id, where);
    overlay_config(j, "ks", spec.ks);
    overlay(j, "rank", spec.rank, where);
    if (j.contains("method")) {
        spec.method = experiment_method_from_string(j.at("method").get<std::string>());
    }
    if (j.contains("splits")) {
        const json& s = j.at("splits");
        if (!s.is_object()) {
            throw ConfigError(where + ".splits must be a JSON object");
        }
        for (const auto& item : s.items()) {
            if (item.key() != "source" && item.key() != "lines" && item.key() != "shift") {
                throw ConfigError(where + ".splits: unknown key '" + item.key() + "'");
            }
        }
        if (s.contains("source")) {
            spec.split_source = split_source_from_string(s.at("source").get<std::string>());
        }
        if (s.contains("lines")) {
            spec.lines = s.at("lines").get<SplitSet>();
        }
        overlay(s, "shift", spec.shift_seconds, where);
    }
    overlay_config(j, "od", spec.od);
    overlay_config(j, "nsplit", spec.nsplit);
    std::string dir = spec.output_dir.string();
    overlay(j, "output_dir", dir, where);
    spec.output_dir = dir;
    overlay(j, "timing_repeats", spec.timing_repeats, where);
    overlay(j, "include_segmentation_time", spec.include_segmentation_time, where);
    overlay(j, "workers", spec.workers, where);
}

const std::vector<std::string>& result_columns()
{
    static const std::vector<std::string> columns = {
        "scenario_id",   "method",        "n_split",           "length_L",
        "rank",          "final_residual_2norm", "rel_frobenius", "wall_time_seconds",
        "stopping_reason", "status",      "message"};
    return columns;
}

std::string result_csv_header()
{
    std::string out;
    for (const auto& c : result_columns()) {
        out += (out.empty() ? "" : ",") + c;
    }
    return out;
}

namespace {

std::string sanitize(std::string text)
{
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\r') {
            c = ';';
        }
    }
    return text;
}

std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

}  // namespace

std::string to_csv_line(const ResultRow& row)
{
    std::ostringstream os;
    os << sanitize(row.scenario_id) << ',' << sanitize(row.method) << ',' << row.n_split << ','
       << format_double(row.length_L) << ',' << row.rank << ','
       << format_double(row.final_residual_2norm) << ',' << format_double(row.rel_frobenius)
       << ',' << format_double(row.wall_time_seconds) << ',' << sanitize(row.stopping_reason)
       << ',' << sanitize(row.status) << ',' << sanitize(row.message);
    return os.str();
}

ResultRow parse_csv_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    if (cells.size() != result_columns().size()) {
        throw IoError("result row has " + std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(result_columns().size()) + ": " + line);
    }
    ResultRow row;
    try {
        row.scenario_id = cells[0];
        row.method = cells[1];
        row.n_split = std::stoi(cells[2]);
        row.length_L = std::stod(cells[3]);
        row.rank = std::stol(cells[4]);
        row.final_residual_2norm = std::stod(cells[5]);
        row.rel_frobenius = std::stod(cells[6]);
        row.wall_time_seconds = std::stod(cells[7]);
    } catch (const std::logic_error&) {
        throw IoError("malformed numeric cell in result row: " + line);
    }
    row.stopping_reason = cells[8];
    row.status = cells[9];
    row.message = cells[10];
    return row;
}

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                       const std::map<std::string, std::string>& metadata)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    for (const auto& [key, value] : metadata) {
        out << "# " << key << '=' << sanitize(value) << '\n';
    }
    out << result_csv_header() << '\n';
    for (const auto& row : rows) {
        out << to_csv_line(row) << '\n';
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    std::vector<ResultRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header_seen) {
            if (line != result_csv_header()) {
                throw IoError(path.string() + ": unexpected header '" + line + "'");
            }
            header_seen = true;
            continue;
        }
        rows.push_back(parse_csv_line(line));
    }
    if (!header_seen) {
        throw IoError(path.string() + ": missing header");
    }
    return rows;
}

std::uint64_t config_hash(const KsConfig& cfg)
{
    const std::string text = json(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

SnapshotCache::SnapshotCache(std::optional<std::filesystem::path> directory)
    : directory_(std::move(directory))
{
}

SnapshotMatrix SnapshotCache::get(const KsConfig& cfg)
{
    const std::uint64_t key = config_hash(cfg);
    {
        std::lock_guard lock(mutex_);
        const auto it = memory_.find(key);
        if (it != memory_.end()) {
            ++hits_;
            return it->second;
        }
    }
    std::optional<std::filesystem::path> file;
    if (directory_) {
        std::ostringstream name;
        name << "ks_" << std::hex << std::setw(16) << std::setfill('0') << key << ".snap";
        file = *directory_ / name.str();
        if (std::filesystem::exists(*file)) {
            json meta;
            SnapshotMatrix data = read_snapshots(*file, &meta);
            if (meta.value("ks", json()) == json(cfg)) {
                std::lock_guard lock(mutex_);
                ++hits_;
                memory_.emplace(key, data);
                return data;
            }
        }
    }
    SnapshotMatrix data = simulate_ks(cfg);
    if (file) {
        write_snapshots(*file, data, json{{"ks", cfg}});
    }
    std::lock_guard lock(mutex_);
    ++misses_;
    memory_.emplace(key, data);
    return data;
}

int SnapshotCache::hits() const
{
    std::lock_guard lock(mutex_);
    return hits_;
}

int SnapshotCache::misses() const
{
    std::lock_guard lock(mutex_);
    return misses_;
}

namespace {

std::string summarize_stops(const std::vector<std::string>& reasons)
{
    std::vector<std::pair<std::string, int>> counts;
    for (const auto& r : reasons) {
        auto it = std::find_if(counts.begin(), counts.end(),
                               [&](const auto& c) { return c.first == r; });
        if (it == counts.end()) {
            counts.emplace_back(r, 1);
        } else {
            ++it->second;
        }
    }
    if (counts.size() == 1 && reasons.size() == 1) {
        return counts.front().first;
    }
    std::string out;
    for (const auto& [reason, count] : counts) {
        out += (out.empty() ? "" : " ") + reason + "=" + std::to_string(count);
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, SnapshotCache* cache)
{
    try {
        spec.validate();
        SnapshotCache local;
        const SnapshotMatrix data = (cache ? *cache : local).get(spec.ks);

        SplitDmdOptions options;
        options.method = (spec.method == ExperimentMethod::dmd ||
                          spec.method == ExperimentMethod::split_dmd)
                             ? Method::standard_dmd
                             : Method::optimized_dmd;
        options.rank = spec.rank;
        options.splits = spec.resolved_splits();
        options.nsplit = spec.nsplit;
        options.od = spec.od;
        options.include_segmentation_time = spec.include_segmentation_time;
        options.workers = spec.workers;

        std::vector<double> times;
        SplitDmdResult fit;
        for (int rep = 0; rep < spec.timing_repeats; ++rep) {
            fit = split_dmd(data, options);
            times.push_back(fit.model.total_fit_time_seconds);
        }
        std::nth_element(times.begin(), times.begin() + static_cast<long>(times.size() / 2),
                         times.end());
        const double median = times[times.size() / 2];

        ExperimentResult result;
        ResultRow& row = result.row;
        row.scenario_id = spec.scenario_id;
        row.method = std::string(to_string(spec.method));
        row.n_split = spec.is_split() ? static_cast<int>(fit.model.splits.num_intervals()) : 0;
        row.length_L = spec.ks.length;
        row.rank = spec.rank;
        row.final_residual_2norm = fit.report.final_residual_2norm;
        row.rel_frobenius = fit.report.rel_frobenius;
        row.wall_time_seconds = median;
        row.stopping_reason = summarize_stops(fit.model.piece_stop_reasons);
        result.model = std::move(fit.model);

        if (!spec.output_dir.empty()) {
            const auto dir = spec.output_dir / spec.scenario_id;
            std::filesystem::create_directories(dir);
            write_json_file(dir / "model.json", result.model);
            write_json_file(dir / "spec.json", spec);
            write_heatmap_csv(dir / "heatmap.csv", data.x_grid, data.t_grid,
                              reconstruct_split(result.model, data.t_grid));
            write_results_csv(dir / "result.csv", {row});
        }
        return result;
    } catch (const Error& e) {
        throw Error(spec.scenario_id + ": " + e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        throw IoError(spec.scenario_id + ": " + e.what());
    }
}

GridResult run_grid(const std::vector<ExperimentSpec>& manifest, const GridOptions& options,
                    SnapshotCache* cache)
{
    if (manifest.empty()) {
        throw ConfigError("empty manifest: nothing to run");
    }
    if (options.workers < 1) {
        throw ConfigError("workers must be positive");
    }
    std::set<std::string> ids;
    for (const auto& spec : manifest) {
        if (!ids.insert(spec.scenario_id).second) {
            throw ConfigError("duplicate scenario_id '" + spec.scenario_id + "' in manifest");
        }
    }

    SnapshotCache local;
    SnapshotCache& store = cache ? *cache : local;
    GridResult result;
    result.rows.resize(manifest.size());
    auto work = [&](std::size_t k) {
        const ExperimentSpec& spec = manifest[k];
        try {
            result.rows[k] = run_experiment(spec, &store).row;
        } catch (const std::exception& e) {
            ResultRow& row = result.rows[k];
            row.scenario_id = spec.scenario_id;
            row.method = std::string(to_string(spec.method));
            row.length_L = spec.ks.length;
            row.rank = spec.rank;
            row.final_residual_2norm = std::numeric_limits<double>::quiet_NaN();
            row.rel_frobenius = std::numeric_limits<double>::quiet_NaN();
            row.wall_time_seconds = std::numeric_limits<double>::quiet_NaN();
            row.status = "failed";
            row.message = e.what();
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(options.workers),
                                               manifest.size());
    if (workers <= 1) {
        for (std::size_t k = 0; k < manifest.size(); ++k) {
            work(k);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t k = next++; k < manifest.size(); k = next++) {
                    work(k);
                }
            });
        }
        for (auto& thread : pool) {
            thread.join();
        }
    }
    result.any_failed = std::any_of(result.rows.begin(), result.rows.end(),
                                    [](const ResultRow& r) { return r.status != "ok"; });
    if (options.csv_path) {
        write_results_csv(*options.csv_path, result.rows, options.metadata);
    }
    return result;
}

std::vector<ExperimentSpec> manifest_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("scenarios") || !j.at("scenarios").is_array()) {
        throw ConfigError("manifest must be an object with a 'scenarios' array");
    }
    for (const auto& item : j.items()) {
        if (item.key() != "defaults" && item.key() != "scenarios") {
            throw ConfigError("manifest: unknown key '" + item.key() + "'");
        }
    }
    ExperimentSpec defaults;
    if (j.contains("defaults")) {
        from_json(j.at("defaults"), defaults);
    }
    std::vector<ExperimentSpec> specs;
    for (const auto& entry : j.at("scenarios")) {
        ExperimentSpec spec = defaults;
        from_json(entry, spec);
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<ExperimentSpec> desk_manifest(bool full_fidelity)
{
    std::vector<ExperimentSpec> specs;
    auto add = [&](std::string id, const KsConfig& ks, Index rank, ExperimentMethod method,
                   std::optional<SplitSet> lines, double shift = 0.0) {
        ExperimentSpec spec;
        spec.scenario_id = std::move(id);
        spec.ks = ks;
        spec.rank = rank;
        spec.method = method;
        if (lines) {
            spec.split_source = shift != 0.0 ? SplitSource::shifted : SplitSource::explicit_lines;
            spec.lines = std::move(lines);
            spec.shift_seconds = shift;
        }
        specs.push_back(std::move(spec));
    };

    KsConfig periodic;
    periodic.length = 12.6;
    KsConfig quasi = periodic;
    quasi.length = 13.2;
    KsConfig chaotic;
    chaotic.length = 402.3;
    chaotic.num_nodes = 1024;
    chaotic.dt_out = full_fidelity ? 0.2 : 1.0;
    KsConfig perturbed = chaotic;
    perturbed.perturb_amplitude = 1.0 / 20.0;
    KsConfig shifted_length = chaotic;
    shifted_length.length = 402.35;

    const SplitSet four = SplitSet::even(0.0, 400.0, 4);
    const SplitSet ten = SplitSet::even(0.0, 400.0, 10);
    using M = ExperimentMethod;
    add("L12.6_od", periodic, 11, M::od, std::nullopt);
    add("L12.6_split_od_4", periodic, 11, M::split_od, four);
    add("L13.2_od", quasi, 13, M::od, std::nullopt);
    add("L13.2_split_od_4", quasi, 13, M::split_od, four);
    add("L402.3_od", chaotic, 13, M::od, std::nullopt);
    add("L402.3_split_od_10", chaotic, 13, M::split_od, ten);
    add("L402.3_beta_dmd", perturbed, 13, M::dmd, std::nullopt);
    add("L402.3_beta_split_dmd_10", perturbed, 13, M::split_dmd, ten);
    add("L402.3_beta_od", perturbed, 13, M::od, std::nullopt);
    add("L402.3_beta_split_od_10", perturbed, 13, M::split_od, ten);
    add("L402.35_od", shifted_length, 13, M::od, std::nullopt);
    add("L402.35_split_od_10", shifted_length, 13, M::split_od, ten);
    for (const double shift : {1.0, -1.0, 3.0, -3.0}) {
        std::ostringstream id;
        id << "L402.3_split_od_10_shift" << std::showpos << shift;
        add(id.str(), chaotic, 13, M::split_od, ten, shift);
    }
    return specs;
}

}  // namespace splitdmd

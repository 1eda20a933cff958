#include "splitdmd/errors.hpp"
#include "splitdmd/experiment.hpp"
#include "splitdmd/io.hpp"
#include "splitdmd/nsplit.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <thread>

using namespace splitdmd;

namespace {

template <typename Config>
Config load_config(const std::string& path, const char* key)
{
    if (path.empty()) {
        return Config{};
    }
    json j = read_json_file(path);
    if (j.contains(key) && j.size() == 1) {
        j = j.at(key);
    }
    return j.get<Config>();
}

std::string hex_hash(std::uint64_t h)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

void print_rows(const std::vector<ResultRow>& rows)
{
    std::cout << std::left << std::setw(34) << "scenario" << std::setw(10) << "method"
              << std::right << std::setw(8) << "n_split" << std::setw(9) << "L" << std::setw(6)
              << "rank" << std::setw(15) << "rel_error" << std::setw(15) << "final_resid"
              << std::setw(12) << "time_s" << "  stop\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(34) << r.scenario_id << std::setw(10) << r.method
                  << std::right << std::setw(8) << r.n_split << std::setw(9) << r.length_L
                  << std::setw(6) << r.rank << std::setw(15) << std::setprecision(6)
                  << r.rel_frobenius << std::setw(15) << r.final_residual_2norm << std::setw(12)
                  << r.wall_time_seconds << "  "
                  << (r.status == "ok" ? r.stopping_reason : "FAILED: " + r.message) << '\n';
    }
}

std::map<std::string, std::string> run_metadata(std::optional<std::uint64_t> seed)
{
    return {{"version", library_version},
            {"seed", seed ? std::to_string(*seed) : std::string("from-config")},
            {"machine", "hardware_concurrency=" +
                            std::to_string(std::thread::hardware_concurrency())}};
}

void apply_seed(ExperimentSpec& spec, std::optional<std::uint64_t> seed)
{
    if (seed) {
        spec.ks.rng_seed = *seed;
        spec.nsplit.rng_seed = *seed;
    }
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Split dynamic mode decomposition experiments on Kuramoto-Sivashinsky data"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<std::uint64_t> seed;
    app.add_option("--seed", seed, "Override every random seed (initial-condition noise, test nodes)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Integrate the KS equation and write snapshots");
    std::string sim_config;
    std::string sim_out;
    std::string sim_csv;
    std::optional<double> sim_length;
    std::optional<int> sim_nodes;
    std::optional<double> sim_final;
    std::optional<double> sim_dt_out;
    std::optional<double> sim_perturb;
    sim->add_option("-c,--config", sim_config, "KsConfig JSON file");
    sim->add_option("-o,--out", sim_out, "Binary snapshot file")->required();
    sim->add_option("--csv", sim_csv, "Also write the snapshots as CSV");
    sim->add_option("--length", sim_length, "Domain length L");
    sim->add_option("--nodes", sim_nodes, "Number of grid nodes");
    sim->add_option("--final-time", sim_final, "Final time T");
    sim->add_option("--dt-out", sim_dt_out, "Snapshot spacing");
    sim->add_option("--perturb", sim_perturb, "Initial-condition perturbation amplitude");

    // split
    auto* split = app.add_subcommand("split", "Segment a snapshot file with the n-split algorithm");
    std::string split_in;
    std::string split_config;
    std::string split_out;
    std::string split_log;
    std::optional<long> split_node;
    split->add_option("-i,--input", split_in, "Binary snapshot file")->required();
    split->add_option("-c,--config", split_config, "NsplitConfig JSON file");
    split->add_option("-o,--out", split_out, "Write the split set as JSON");
    split->add_option("--node", split_node, "Run on this node only instead of the consensus");
    split->add_option("--log", split_log, "Write every test evaluation to this file");

    // fit
    auto* fit = app.add_subcommand("fit", "Run one experiment spec");
    std::string fit_config;
    std::string fit_output;
    std::string fit_cache;
    fit->add_option("-c,--config", fit_config, "ExperimentSpec JSON file")->required();
    fit->add_option("--output-dir", fit_output, "Override the spec's output directory");
    fit->add_option("--cache-dir", fit_cache, "Snapshot cache directory");

    // grid
    auto* grid = app.add_subcommand("grid", "Run a manifest of experiment specs");
    std::string grid_manifest;
    std::string grid_out = "results.csv";
    std::string grid_cache;
    std::string grid_output;
    bool grid_preset = false;
    bool grid_full = false;
    int grid_workers = 1;
    std::optional<int> grid_repeats;
    grid->add_option("-m,--manifest", grid_manifest, "Manifest JSON file");
    grid->add_flag("--desk", grid_preset, "Use the built-in desk-scale manifest");
    grid->add_flag("--full-fidelity", grid_full, "Built-in manifest at full snapshot rate");
    grid->add_option("-o,--out", grid_out, "Result CSV");
    grid->add_option("--cache-dir", grid_cache, "Snapshot cache directory");
    grid->add_option("--output-dir", grid_output, "Write per-scenario artifacts here");
    grid->add_option("--workers", grid_workers, "Concurrent scenarios")->check(CLI::PositiveNumber);
    grid->add_option("--repeats", grid_repeats, "Timing repeats per scenario")
        ->check(CLI::PositiveNumber);
    grid->add_flag("--print-manifest", "Print the resolved manifest as JSON and exit");

    // report
    auto* report = app.add_subcommand("report", "Aggregate result CSV files");
    std::vector<std::string> report_in;
    std::string report_out;
    report->add_option("inputs", report_in, "Result CSV files")->required()->check(CLI::ExistingFile);
    report->add_option("-o,--out", report_out, "Write the combined rows to this CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            KsConfig cfg = load_config<KsConfig>(sim_config, "ks");
            if (sim_length) cfg.length = *sim_length;
            if (sim_nodes) cfg.num_nodes = *sim_nodes;
            if (sim_final) cfg.final_time = *sim_final;
            if (sim_dt_out) cfg.dt_out = *sim_dt_out;
            if (sim_perturb) cfg.perturb_amplitude = *sim_perturb;
            if (seed) cfg.rng_seed = *seed;
            const SnapshotMatrix data = simulate_ks(cfg);
            write_snapshots(sim_out, data, json{{"ks", cfg}});
            if (!sim_csv.empty()) {
                write_snapshots_csv(sim_csv, data);
            }
            std::cout << "wrote " << data.num_nodes() << " x " << data.num_snapshots()
                      << " snapshots to " << sim_out << " (config " << hex_hash(config_hash(cfg))
                      << ")\n";
            return 0;
        }

        if (*split) {
            NsplitConfig cfg = load_config<NsplitConfig>(split_config, "nsplit");
            if (seed) cfg.rng_seed = *seed;
            const SnapshotMatrix data = read_snapshots(split_in);
            std::ofstream log_file;
            std::ostream* log = nullptr;
            if (!split_log.empty()) {
                log_file.open(split_log);
                if (!log_file) {
                    throw IoError("cannot open " + split_log);
                }
                log = &log_file;
            }
            SplitSet splits;
            if (split_node) {
                const auto initial =
                    SplitSet::even(data.t_begin(), data.t_end(), cfg.initial_num_splits);
                const NsplitResult r = n_split(data, *split_node, initial, cfg, log);
                splits = r.splits;
                std::cout << "node " << *split_node << ": " << r.iterations << " iterations, "
                          << (r.stable ? "stable" : "iteration budget exhausted") << '\n';
            } else {
                const RobustSplitResult r = robust_split_detailed(data, cfg, log);
                splits = r.splits;
                for (std::size_t k = 0; k < r.nodes.size(); ++k) {
                    std::cout << "node " << r.nodes[k] << ": " << r.runs[k].splits << " ("
                              << r.runs[k].iterations << " iterations"
                              << (r.runs[k].stable ? "" : ", unstable") << ")\n";
                }
            }
            std::cout << "splits " << splits << '\n';
            if (!split_out.empty()) {
                write_json_file(split_out, json(splits));
            }
            return 0;
        }

        if (*fit) {
            ExperimentSpec spec = read_json_file(fit_config).get<ExperimentSpec>();
            apply_seed(spec, seed);
            if (!fit_output.empty()) {
                spec.output_dir = fit_output;
            }
            std::optional<std::filesystem::path> dir;
            if (!fit_cache.empty()) {
                dir = fit_cache;
            }
            SnapshotCache cache(dir);
            const GridResult r = run_grid({spec}, {}, &cache);
            print_rows(r.rows);
            std::cout << result_csv_header() << '\n' << to_csv_line(r.rows.front()) << '\n';
            return r.any_failed ? 1 : 0;
        }

        if (*grid) {
            std::vector<ExperimentSpec> manifest;
            if (grid_preset || grid_full) {
                manifest = desk_manifest(grid_full);
            } else if (!grid_manifest.empty()) {
                manifest = manifest_from_json(read_json_file(grid_manifest));
            } else {
                throw ConfigError("grid needs --manifest or --desk");
            }
            for (auto& spec : manifest) {
                apply_seed(spec, seed);
                if (!grid_output.empty()) {
                    spec.output_dir = grid_output;
                }
                if (grid_repeats) {
                    spec.timing_repeats = *grid_repeats;
                }
            }
            if (grid->count("--print-manifest")) {
                json j = json::array();
                for (const auto& spec : manifest) {
                    j.push_back(spec);
                }
                std::cout << json{{"scenarios", j}}.dump(2) << '\n';
                return 0;
            }
            std::optional<std::filesystem::path> dir;
            if (!grid_cache.empty()) {
                dir = grid_cache;
            }
            SnapshotCache cache(dir);
            GridOptions options;
            options.workers = grid_workers;
            options.csv_path = grid_out;
            options.metadata = run_metadata(seed);
            const GridResult r = run_grid(manifest, options, &cache);
            print_rows(r.rows);
            std::cout << "wrote " << grid_out << '\n';
            return r.any_failed ? 1 : 0;
        }

        if (*report) {
            std::vector<ResultRow> rows;
            for (const auto& path : report_in) {
                const auto part = read_results_csv(path);
                rows.insert(rows.end(), part.begin(), part.end());
            }
            print_rows(rows);
            if (!report_out.empty()) {
                write_results_csv(report_out, rows, run_metadata(seed));
            }
            const bool failed = std::any_of(rows.begin(), rows.end(),
                                            [](const ResultRow& r) { return r.status != "ok"; });
            return failed ? 1 : 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

#pragma once

#include "splitdmd/io.hpp"
#include "splitdmd/ks_solver.hpp"
#include "splitdmd/lm.hpp"
#include "splitdmd/nsplit.hpp"
#include "splitdmd/split_dmd.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace splitdmd {

inline constexpr const char* library_version = "0.1.0";

enum class ExperimentMethod { dmd, od, split_dmd, split_od };
enum class SplitSource { automatic, explicit_lines, shifted };

std::string_view to_string(ExperimentMethod method);
ExperimentMethod experiment_method_from_string(std::string_view name);
std::string_view to_string(SplitSource source);
SplitSource split_source_from_string(std::string_view name);

struct ExperimentSpec {
    std::string scenario_id;
    KsConfig ks;
    Index rank = 11;
    ExperimentMethod method = ExperimentMethod::od;
    SplitSource split_source = SplitSource::automatic;
    /// Lines for explicit splits, base lines for shifted splits.
    std::optional<SplitSet> lines;
    double shift_seconds = 0.0;
    VarproConfig od;
    NsplitConfig nsplit;
    /// Artifacts go to output_dir / scenario_id; nothing is written when empty.
    std::filesystem::path output_dir;
    /// Fits are repeated and the median wall time is reported.
    int timing_repeats = 3;
    bool include_segmentation_time = true;
    int workers = 1;

    bool is_split() const;
    /// Throws ConfigError for an inconsistent spec.
    void validate() const;
    /// The split set handed to the driver, or nullopt for automatic splits.
    std::optional<SplitSet> resolved_splits() const;
};

void to_json(json& j, const ExperimentSpec& spec);
/// Keys missing from j keep the values already in spec, so a manifest's
/// defaults can be applied first.
void from_json(const json& j, ExperimentSpec& spec);

struct ResultRow {
    std::string scenario_id;
    std::string method;
    /// Number of subintervals for split methods, 0 for unsplit ones.
    int n_split = 0;
    double length_L = 0.0;
    Index rank = 0;
    double final_residual_2norm = 0.0;
    double rel_frobenius = 0.0;
    double wall_time_seconds = 0.0;
    std::string stopping_reason;
    /// "ok" or "failed".
    std::string status = "ok";
    std::string message;

    bool operator==(const ResultRow& other) const = default;
};

/// Column names of the result CSV, in order.
const std::vector<std::string>& result_columns();
std::string result_csv_header();
std::string to_csv_line(const ResultRow& row);
ResultRow parse_csv_line(const std::string& line);

/// Writes '#'-prefixed metadata lines, the header and one line per row.
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                       const std::map<std::string, std::string>& metadata = {});
/// Skips '#' lines and the header. Throws IoError on malformed rows.
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// 64-bit FNV-1a hash of the canonical JSON form of the config.
std::uint64_t config_hash(const KsConfig& cfg);

/// Snapshot store keyed by config_hash. Entries live in memory and, when a
/// directory is given, on disk as binary containers. Safe to share between
/// threads.
class SnapshotCache {
public:
    explicit SnapshotCache(std::optional<std::filesystem::path> directory = std::nullopt);

    SnapshotMatrix get(const KsConfig& cfg);
    int hits() const;
    int misses() const;

private:
    std::optional<std::filesystem::path> directory_;
    std::map<std::uint64_t, SnapshotMatrix> memory_;
    mutable std::mutex mutex_;
    int hits_ = 0;
    int misses_ = 0;
};

struct ExperimentResult {
    ResultRow row;
    SplitDmdModel model;
};

/// Simulates (or loads) the snapshots, fits the requested method and, when
/// output_dir is set, writes model.json, heatmap.csv (x, t, reconstruction)
/// and result.csv. Errors from inner modules are rethrown as Error with the
/// scenario id prefixed.
ExperimentResult run_experiment(const ExperimentSpec& spec, SnapshotCache* cache = nullptr);

struct GridOptions {
    int workers = 1;
    std::optional<std::filesystem::path> csv_path;
    std::map<std::string, std::string> metadata;
};

struct GridResult {
    std::vector<ResultRow> rows;
    bool any_failed = false;
};

/// Runs every spec; failures become rows with status "failed" and the grid
/// continues. Throws ConfigError for an empty manifest or duplicate ids.
GridResult run_grid(const std::vector<ExperimentSpec>& manifest, const GridOptions& options,
                    SnapshotCache* cache = nullptr);

/// Manifest file: {"defaults": {...}, "scenarios": [{...}, ...]}. Each
/// scenario is the defaults overlaid with its own keys.
std::vector<ExperimentSpec> manifest_from_json(const json& j);

/// Desk-scale version of the split-vs-unsplit comparisons: the periodic,
/// quasi-periodic and chaotic scenarios, the perturbed initial condition and
/// the shifted split lines. `full_fidelity` uses dt_out = 0.2 everywhere.
std::vector<ExperimentSpec> desk_manifest(bool full_fidelity = false);

}  // namespace splitdmd

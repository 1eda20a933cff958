#pragma once

#include "splitdmd/dmd.hpp"
#include "splitdmd/ks_solver.hpp"
#include "splitdmd/lm.hpp"
#include "splitdmd/nsplit.hpp"
#include "splitdmd/split_dmd.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace splitdmd {

using json = nlohmann::json;

// Config objects read from JSON keep their defaults for missing keys and
// reject unknown keys with ConfigError.
void to_json(json& j, const KsConfig& cfg);
void from_json(const json& j, KsConfig& cfg);
void to_json(json& j, const VarproConfig& cfg);
void from_json(const json& j, VarproConfig& cfg);
void to_json(json& j, const NsplitConfig& cfg);
void from_json(const json& j, NsplitConfig& cfg);

/// A split set is a plain JSON array of times.
void to_json(json& j, const SplitSet& splits);
void from_json(const json& j, SplitSet& splits);

/// Complex arrays are stored as separate "real" and "imag" planes.
void to_json(json& j, const DmdModel& model);
void from_json(const json& j, DmdModel& model);
void to_json(json& j, const SplitDmdModel& model);
void from_json(const json& j, SplitDmdModel& model);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

/// Binary snapshot container: the magic "SPDMDSNP", a little-endian uint64
/// header length, a JSON header ({"rows", "cols", "meta"}), then x_grid,
/// t_grid and the values in column-major order as raw doubles.
void write_snapshots(const std::filesystem::path& path, const SnapshotMatrix& data,
                     const json& meta = json::object());
SnapshotMatrix read_snapshots(const std::filesystem::path& path, json* meta = nullptr);

/// CSV with the time grid in the first row and the node coordinate in the
/// first column.
void write_snapshots_csv(const std::filesystem::path& path, const SnapshotMatrix& data);
SnapshotMatrix read_snapshots_csv(const std::filesystem::path& path);

/// Long-format "x,t,value" rows, one per grid point.
void write_heatmap_csv(const std::filesystem::path& path, const Eigen::VectorXd& x_grid,
                       const Eigen::VectorXd& t_grid, const Eigen::MatrixXd& values);

}  // namespace splitdmd

#pragma once

#include "splitdmd/dmd.hpp"
#include "splitdmd/lm.hpp"
#include "splitdmd/nsplit.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace splitdmd {

enum class Method { standard_dmd, optimized_dmd };

std::string_view to_string(Method method);
/// Accepts "standard_dmd"/"dmd" and "optimized_dmd"/"od".
Method method_from_string(std::string_view name);

struct SplitDmdModel {
    SplitSet splits;
    std::vector<DmdModel> pieces;
    Method method = Method::standard_dmd;
    Index rank = 1;
    /// Sum of the per-piece fit times, plus the segmentation time when it is
    /// included.
    double total_fit_time_seconds = 0.0;
    double segmentation_time_seconds = 0.0;
    std::vector<double> piece_fit_seconds;
    /// "exact" for standard DMD, the optimizer stop reason otherwise.
    std::vector<std::string> piece_stop_reasons;
};

struct SplitDmdOptions {
    Method method = Method::standard_dmd;
    Index rank = 1;
    /// Used verbatim (snapped to snapshot times) when set; otherwise the
    /// lines come from robust_split with `nsplit`.
    std::optional<SplitSet> splits;
    NsplitConfig nsplit;
    VarproConfig od;
    bool include_segmentation_time = true;
    /// Worker threads for the per-piece fits; 1 fits sequentially.
    int workers = 1;
};

struct SplitDmdResult {
    SplitDmdModel model;
    ErrorReport report;
};

/// Split DMD: segment the horizon, fit one model per subinterval on its
/// closed column block (boundary columns are shared by neighbours) and score
/// the left-closed piecewise reconstruction against the full data.
///
/// Throws ConfigError naming the subinterval when a block has fewer than
/// rank + 1 columns.
SplitDmdResult split_dmd(const SnapshotMatrix& data, const SplitDmdOptions& options);

/// Piecewise reconstruction, real part. Each time is evaluated by the piece
/// owning it: [t_{k-1}, t_k) for all but the last piece, which is closed.
/// Throws DomainError for times outside the split horizon.
Eigen::MatrixXd reconstruct_split(const SplitDmdModel& model, const Eigen::VectorXd& t_grid);

/// Moves every interior line by shift_seconds; end points stay put. Throws
/// DomainError when the shifted lines leave the open horizon or lose their
/// order.
SplitSet shift_splits(const SplitSet& splits, double shift_seconds);

/// Snaps split lines to snapshot times. Throws DomainError when the end
/// points do not match the data horizon or two lines collapse onto the same
/// snapshot.
SplitSet snap_to_snapshots(const SnapshotMatrix& data, const SplitSet& splits);

}  // namespace splitdmd

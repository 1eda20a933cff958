#pragma once

#include "splitdmd/snapshot.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace splitdmd {

/// Ascending split lines {t_0, ..., t_n}; the first and last entries are the
/// ends of the time horizon and n >= 1 is the number of subintervals.
class SplitSet {
public:
    SplitSet() = default;
    /// Throws DomainError unless lines has at least two strictly ascending
    /// entries.
    explicit SplitSet(std::vector<double> lines);

    /// {t_begin, t_end}.
    static SplitSet whole(double t_begin, double t_end);
    /// n_intervals equal subintervals of [t_begin, t_end].
    static SplitSet even(double t_begin, double t_end, int n_intervals);

    const std::vector<double>& lines() const { return lines_; }
    std::vector<double> interior() const;
    Index num_intervals() const { return static_cast<Index>(lines_.size()) - 1; }
    Index num_interior() const { return num_intervals() - 1; }
    double front() const { return lines_.front(); }
    double back() const { return lines_.back(); }
    double operator[](Index k) const { return lines_.at(static_cast<std::size_t>(k)); }

    /// Subinterval index owning t under the left-closed convention (the last
    /// subinterval is closed). Throws DomainError outside [front, back].
    Index owner(double t) const;

    bool operator==(const SplitSet& other) const = default;

private:
    std::vector<double> lines_{0.0, 1.0};
};

std::ostream& operator<<(std::ostream& os, const SplitSet& splits);

struct NsplitConfig {
    double eps_fraction = 0.1;
    double delta_fraction = 0.1;
    int max_iterations = 100;
    int initial_num_splits = 4;
    int num_x_tests = 5;
    std::uint64_t rng_seed = 0;
    double consensus_threshold = 0.6;
    /// Defaults to half of delta when unset.
    std::optional<double> merge_tolerance;

    void validate() const;
    double delta(double horizon) const { return delta_fraction * horizon; }
    double merge_tol(double horizon) const;
};

struct Range {
    double min = 0.0;
    double max = 0.0;
};

/// Min and max of row x_test over the snapshot columns with t in [t_a, t_b].
Range subinterval_range(const SnapshotMatrix& data, Index x_test, double t_a, double t_b);

/// Range test on line k: false (discard) when both bound differences between
/// [t_{k-1}, t_k] and [t_k, t_{k+1}] are strictly below eps.
bool epsilon_test(const SnapshotMatrix& data, Index x_test, const SplitSet& splits, Index k,
                  double eps);

/// Same rule applied to two precomputed ranges.
bool ranges_differ(const Range& left, const Range& right, double eps);

/// Length test on line k. The trailing subinterval is checked as well when k
/// is the last interior line.
bool delta_test(const SplitSet& splits, Index k, double delta);

/// One evaluation pass over fixed candidate lines without any refinement:
/// every line is tested against its neighbours in the candidate set and the
/// lines passing both tests are kept. Candidates are snapped to snapshot
/// times.
SplitSet sweep_lines(const SnapshotMatrix& data, Index x_test, const SplitSet& candidates,
                     double eps, double delta, std::ostream* log = nullptr);

struct NsplitResult {
    SplitSet splits;
    int iterations = 0;
    /// False when the iteration budget ran out before a pass left the lines
    /// unchanged.
    bool stable = false;
};

/// Recursive n-split segmentation on one spatial node. Lines are snapped to
/// snapshot times. eps and delta are fixed from the full horizon: eps is
/// eps_fraction times the sup norm of the row, delta is delta_fraction times
/// the horizon length. When log is given, every test evaluation is written
/// to it, one line per evaluation.
NsplitResult n_split(const SnapshotMatrix& data, Index x_test, const SplitSet& initial,
                     const NsplitConfig& cfg, std::ostream* log = nullptr);

/// Clusters lines from several runs (lines closer than merge_tol join a
/// cluster) and keeps the mean of every cluster supported by at least
/// threshold * runs.size() distinct runs. Output is sorted.
std::vector<double> consensus_lines(const std::vector<SplitSet>& runs, double threshold,
                                    double merge_tol);

struct RobustSplitResult {
    SplitSet splits;
    std::vector<Index> nodes;
    std::vector<NsplitResult> runs;
};

/// n_split on cfg.num_x_tests seeded random nodes, merged by consensus.
/// Surviving lines are snapped and must pass the range test on at least the
/// consensus share of the nodes and the length test.
RobustSplitResult robust_split_detailed(const SnapshotMatrix& data, const NsplitConfig& cfg,
                                        std::ostream* log = nullptr);

SplitSet robust_split(const SnapshotMatrix& data, const NsplitConfig& cfg,
                      std::ostream* log = nullptr);

}  // namespace splitdmd

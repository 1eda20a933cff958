#include "splitdmd/nsplit.hpp"

#include "splitdmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace splitdmd {

SplitSet::SplitSet(std::vector<double> lines) : lines_(std::move(lines))
{
    if (lines_.size() < 2) {
        throw DomainError("a split set needs at least the two end points");
    }
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        if (!std::isfinite(lines_[k])) {
            throw DomainError("split line " + std::to_string(k) + " is not finite");
        }
        if (k > 0 && !(lines_[k] > lines_[k - 1])) {
            throw DomainError("split lines must be strictly ascending (line " +
                              std::to_string(k) + " = " + std::to_string(lines_[k]) +
                              " after " + std::to_string(lines_[k - 1]) + ")");
        }
    }
}

SplitSet SplitSet::whole(double t_begin, double t_end)
{
    return SplitSet({t_begin, t_end});
}

SplitSet SplitSet::even(double t_begin, double t_end, int n_intervals)
{
    if (n_intervals < 1) {
        throw DomainError("number of subintervals must be positive");
    }
    std::vector<double> lines(static_cast<std::size_t>(n_intervals) + 1);
    for (int k = 0; k <= n_intervals; ++k) {
        lines[static_cast<std::size_t>(k)] =
            t_begin + (t_end - t_begin) * static_cast<double>(k) / n_intervals;
    }
    lines.back() = t_end;
    return SplitSet(std::move(lines));
}

std::vector<double> SplitSet::interior() const
{
    return {lines_.begin() + 1, lines_.end() - 1};
}

Index SplitSet::owner(double t) const
{
    if (!(t >= lines_.front() && t <= lines_.back())) {
        throw DomainError("time " + std::to_string(t) + " is outside the split horizon [" +
                          std::to_string(lines_.front()) + ", " +
                          std::to_string(lines_.back()) + "]");
    }
    const auto it = std::upper_bound(lines_.begin(), lines_.end(), t);
    const auto idx = static_cast<Index>(it - lines_.begin()) - 1;
    return std::min(idx, num_intervals() - 1);
}

std::ostream& operator<<(std::ostream& os, const SplitSet& splits)
{
    os << '{';
    for (std::size_t k = 0; k < splits.lines().size(); ++k) {
        os << (k ? ", " : "") << splits.lines()[k];
    }
    return os << '}';
}

void NsplitConfig::validate() const
{
    if (!(eps_fraction > 0.0 && eps_fraction < 1.0)) {
        throw ConfigError("eps_fraction must lie in (0, 1)");
    }
    if (!(delta_fraction > 0.0 && delta_fraction < 1.0)) {
        throw ConfigError("delta_fraction must lie in (0, 1)");
    }
    if (max_iterations < 1) {
        throw ConfigError("max_iterations must be positive");
    }
    if (initial_num_splits < 1) {
        throw ConfigError("initial_num_splits must be positive");
    }
    if (num_x_tests < 1) {
        throw ConfigError("num_x_tests must be positive");
    }
    if (!(consensus_threshold > 0.0 && consensus_threshold <= 1.0)) {
        throw ConfigError("consensus_threshold must lie in (0, 1]");
    }
    if (merge_tolerance && !(*merge_tolerance >= 0.0)) {
        throw ConfigError("merge_tolerance must be non-negative");
    }
}

double NsplitConfig::merge_tol(double horizon) const
{
    return merge_tolerance ? *merge_tolerance : 0.5 * delta(horizon);
}

Range subinterval_range(const SnapshotMatrix& data, Index x_test, double t_a, double t_b)
{
    if (x_test < 0 || x_test >= data.num_nodes()) {
        throw IndexError("test node " + std::to_string(x_test) + " outside [0, " +
                         std::to_string(data.num_nodes()) + ")");
    }
    if (!(t_a < t_b)) {
        throw DomainError("subinterval needs t_a < t_b");
    }
    const auto [first, last] = data.columns_in(t_a, t_b);
    const auto row = data.values.row(x_test).segment(first, last - first + 1);
    return {row.minCoeff(), row.maxCoeff()};
}

bool ranges_differ(const Range& left, const Range& right, double eps)
{
    const bool same_max = std::abs(left.max - right.max) < eps;
    const bool same_min = std::abs(left.min - right.min) < eps;
    return !(same_max && same_min);
}

namespace {

void check_line_index(const SplitSet& splits, Index k)
{
    if (k < 1 || k > splits.num_interior()) {
        throw IndexError("split line index " + std::to_string(k) + " outside [1, " +
                         std::to_string(splits.num_interior()) + "]");
    }
}

// Relative slack for length comparisons on snapped lines.
constexpr double length_slack = 1e-9;

bool long_enough(double length, double delta, double horizon)
{
    return length >= delta - length_slack * horizon;
}

}  // namespace

bool epsilon_test(const SnapshotMatrix& data, Index x_test, const SplitSet& splits, Index k,
                  double eps)
{
    check_line_index(splits, k);
    const Range left = subinterval_range(data, x_test, splits[k - 1], splits[k]);
    const Range right = subinterval_range(data, x_test, splits[k], splits[k + 1]);
    return ranges_differ(left, right, eps);
}

bool delta_test(const SplitSet& splits, Index k, double delta)
{
    check_line_index(splits, k);
    const double horizon = splits.back() - splits.front();
    if (!long_enough(splits[k] - splits[k - 1], delta, horizon)) {
        return false;
    }
    if (k == splits.num_interior()) {
        return long_enough(splits[k + 1] - splits[k], delta, horizon);
    }
    return true;
}

namespace {

using Columns = std::vector<Index>;

// Single-node segmentation state. Lines are held as snapshot column indices.
class Segmenter {
public:
    Segmenter(const SnapshotMatrix& data, Index node, Index first, Index last,
              const NsplitConfig& cfg, std::ostream* log)
        : t_(data.t_grid), row_(data.values.row(node).transpose()), node_(node), log_(log),
          max_iterations_(cfg.max_iterations)
    {
        horizon_ = t_(last) - t_(first);
        eps_ = cfg.eps_fraction * row_.segment(first, last - first + 1).cwiseAbs().maxCoeff();
        delta_ = cfg.delta(horizon_);
        merge_tol_ = cfg.merge_tol(horizon_);
    }

    Segmenter(const SnapshotMatrix& data, Index node, Index first, Index last, double eps,
              double delta, std::ostream* log)
        : t_(data.t_grid), row_(data.values.row(node).transpose()), node_(node), log_(log),
          max_iterations_(0), horizon_(t_(last) - t_(first)), eps_(eps), delta_(delta)
    {
    }

    double eps() const { return eps_; }
    double delta() const { return delta_; }
    int iterations() const { return iterations_; }
    bool budget_left() const { return iterations_ < max_iterations_; }

    Range range(Index a, Index b) const
    {
        const auto seg = row_.segment(a, b - a + 1);
        return {seg.minCoeff(), seg.maxCoeff()};
    }

    bool long_enough(Index a, Index b) const
    {
        return splitdmd::long_enough(t_(b) - t_(a), delta_, horizon_);
    }

    // Both tests for the line `mid` between neighbours `left` and `right`.
    bool test_line(Index left, Index mid, Index right, bool last) const
    {
        const Range lr = range(left, mid);
        const Range rr = range(mid, right);
        const bool eps_ok = ranges_differ(lr, rr, eps_);
        const bool delta_ok = long_enough(left, mid) && (!last || long_enough(mid, right));
        const bool keep = eps_ok && delta_ok;
        if (log_) {
            *log_ << "node=" << node_ << " line=" << t_(mid) << " left=[" << t_(left) << ','
                  << t_(mid) << "] range=[" << lr.min << ',' << lr.max << "] right=["
                  << t_(mid) << ',' << t_(right) << "] range=[" << rr.min << ',' << rr.max
                  << "] eps=" << eps_ << " dmax=" << std::abs(lr.max - rr.max)
                  << " dmin=" << std::abs(lr.min - rr.min) << " delta=" << delta_
                  << " len_left=" << t_(mid) - t_(left) << " len_right=" << t_(right) - t_(mid)
                  << " last=" << last << " verdict=" << (keep ? "retain" : "discard") << '\n';
        }
        return keep;
    }

    // Evaluation pass from t_begin to t_end: every line is tested against its
    // neighbours in the candidate configuration.
    Columns sweep(const Columns& lines) const
    {
        Columns out{lines.front()};
        const std::size_t n = lines.size() - 1;
        for (std::size_t k = 1; k < n; ++k) {
            if (test_line(lines[k - 1], lines[k], lines[k + 1], k + 1 == n)) {
                out.push_back(lines[k]);
            }
        }
        out.push_back(lines.back());
        return out;
    }

    Columns even(Index a, Index b, int n_intervals) const
    {
        Columns lines;
        for (int k = 0; k <= n_intervals; ++k) {
            const double pos = static_cast<double>(a) +
                               static_cast<double>(b - a) * k / static_cast<double>(n_intervals);
            const auto c = static_cast<Index>(std::llround(pos));
            if (lines.empty() || c > lines.back()) {
                lines.push_back(c);
            }
        }
        return lines;
    }

    // One invocation of the recursive algorithm on [lines.front(), lines.back()].
    Columns run(const Columns& lines)
    {
        ++iterations_;
        const Index a = lines.front();
        const Index b = lines.back();
        const Columns kept = sweep(lines);
        if (kept.size() == 2) {
            const int next = static_cast<int>(lines.size());
            const double piece = (t_(b) - t_(a)) / next;
            if (!budget_left() || !splitdmd::long_enough(piece, delta_, horizon_) ||
                b - a < next) {
                return {a, b};
            }
            return run(even(a, b, next));
        }
        Columns out = kept;
        for (std::size_t k = 1; k + 1 < kept.size(); ++k) {
            refine(kept[k - 1], kept[k], out);
        }
        refine(kept[kept.size() - 2], b, out);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    // Bisection refinement of one subinterval; new lines are appended to out.
    void refine(Index a, Index b, Columns& out)
    {
        if (!budget_left() || b - a < 2 ||
            !splitdmd::long_enough(0.5 * (t_(b) - t_(a)), delta_, horizon_)) {
            return;
        }
        const Index mid = (a + b) / 2;
        const Columns sub = run({a, mid, b});
        out.insert(out.end(), sub.begin() + 1, sub.end() - 1);
    }

    // Moves each line towards the column where the data range actually
    // changes, scanning outwards from both neighbouring subintervals.
    Columns relocate(const Columns& lines) const
    {
        Columns out = lines;
        for (std::size_t k = 1; k + 1 < lines.size(); ++k) {
            const Index lo = lines[k - 1];
            const Index c = lines[k];
            const Index hi = lines[k + 1];

            const Range left = range(lo, c);
            Index reach_right = c;
            double run_min = left.min;
            double run_max = left.max;
            while (reach_right < hi) {
                run_min = std::min(run_min, row_(reach_right + 1));
                run_max = std::max(run_max, row_(reach_right + 1));
                if (ranges_differ(left, {run_min, run_max}, eps_)) {
                    break;
                }
                ++reach_right;
            }

            const Range right = range(c, hi);
            Index reach_left = c;
            run_min = right.min;
            run_max = right.max;
            while (reach_left > lo) {
                run_min = std::min(run_min, row_(reach_left - 1));
                run_max = std::max(run_max, row_(reach_left - 1));
                if (ranges_differ(right, {run_min, run_max}, eps_)) {
                    break;
                }
                --reach_left;
            }

            const bool left_informative = reach_right < hi;
            const bool right_informative = reach_left > lo;
            if (left_informative && right_informative) {
                out[k] = (reach_right + reach_left) / 2;
            } else if (left_informative) {
                out[k] = reach_right;
            } else if (right_informative) {
                out[k] = reach_left;
            }
        }
        std::sort(out.begin() + 1, out.end() - 1);
        return out;
    }

    // Drops lines hugging an end point and replaces clusters of lines closer
    // than the merge tolerance by their mean.
    Columns merge(const Columns& lines) const
    {
        const Index a = lines.front();
        const Index b = lines.back();
        Columns out{a};
        std::vector<Index> cluster;
        auto flush = [&] {
            if (cluster.empty()) {
                return;
            }
            const double mean =
                std::accumulate(cluster.begin(), cluster.end(), 0.0) / cluster.size();
            const auto c = static_cast<Index>(std::llround(mean));
            if (c > out.back() && c < b) {
                out.push_back(c);
            }
            cluster.clear();
        };
        for (std::size_t k = 1; k + 1 < lines.size(); ++k) {
            const Index c = lines[k];
            if (t_(c) - t_(a) < merge_tol_ || t_(b) - t_(c) < merge_tol_ || c <= a || c >= b) {
                continue;
            }
            if (!cluster.empty() && t_(c) - t_(cluster.back()) >= merge_tol_) {
                flush();
            }
            cluster.push_back(c);
        }
        flush();
        out.push_back(b);
        return out;
    }

    // Repeats the sweep until no line is dropped.
    Columns verify(Columns lines) const
    {
        for (;;) {
            Columns next = sweep(lines);
            if (next == lines) {
                return lines;
            }
            lines = std::move(next);
        }
    }

private:
    const Eigen::VectorXd& t_;
    Eigen::VectorXd row_;
    Index node_;
    std::ostream* log_;
    int max_iterations_;
    int iterations_ = 0;
    double horizon_ = 0.0;
    double eps_ = 0.0;
    double delta_ = 0.0;
    double merge_tol_ = 0.0;
};

Columns snap(const SnapshotMatrix& data, const SplitSet& splits)
{
    const double slack = 1e-9 * std::max(data.dt(), 1e-300);
    if (splits.front() < data.t_begin() - slack || splits.back() > data.t_end() + slack) {
        throw DomainError("split horizon lies outside the snapshot times");
    }
    Columns cols;
    for (const double t : splits.lines()) {
        const Index c = data.nearest_column(t);
        if (cols.empty() || c > cols.back()) {
            cols.push_back(c);
        }
    }
    if (cols.size() < 2) {
        throw EmptyIntervalError("split horizon covers a single snapshot column");
    }
    return cols;
}

SplitSet to_split_set(const SnapshotMatrix& data, const Columns& cols)
{
    std::vector<double> lines;
    lines.reserve(cols.size());
    for (const Index c : cols) {
        lines.push_back(data.t_grid(c));
    }
    return SplitSet(std::move(lines));
}

}  // namespace

SplitSet sweep_lines(const SnapshotMatrix& data, Index x_test, const SplitSet& candidates,
                     double eps, double delta, std::ostream* log)
{
    if (x_test < 0 || x_test >= data.num_nodes()) {
        throw IndexError("test node " + std::to_string(x_test) + " outside [0, " +
                         std::to_string(data.num_nodes()) + ")");
    }
    const Columns lines = snap(data, candidates);
    const Segmenter seg(data, x_test, lines.front(), lines.back(), eps, delta, log);
    return to_split_set(data, seg.sweep(lines));
}

NsplitResult n_split(const SnapshotMatrix& data, Index x_test, const SplitSet& initial,
                     const NsplitConfig& cfg, std::ostream* log)
{
    cfg.validate();
    if (x_test < 0 || x_test >= data.num_nodes()) {
        throw IndexError("test node " + std::to_string(x_test) + " outside [0, " +
                         std::to_string(data.num_nodes()) + ")");
    }
    Columns lines = snap(data, initial);
    Segmenter seg(data, x_test, lines.front(), lines.back(), cfg, log);

    NsplitResult result;
    if (seg.eps() == 0.0) {
        // Identically zero row: every subinterval has the same range.
        result.splits = to_split_set(data, {lines.front(), lines.back()});
        result.stable = true;
        return result;
    }

    while (seg.budget_left()) {
        Columns next = seg.merge(seg.relocate(seg.run(lines)));
        if (next == lines) {
            result.stable = true;
            break;
        }
        lines = std::move(next);
    }
    lines = seg.verify(lines);
    result.splits = to_split_set(data, lines);
    result.iterations = seg.iterations();
    return result;
}

std::vector<double> consensus_lines(const std::vector<SplitSet>& runs, double threshold,
                                    double merge_tol)
{
    std::vector<std::pair<double, std::size_t>> votes;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (const double t : runs[r].interior()) {
            votes.emplace_back(t, r);
        }
    }
    std::sort(votes.begin(), votes.end());

    std::vector<double> out;
    const double needed = threshold * static_cast<double>(runs.size()) - 1e-12;
    std::size_t start = 0;
    while (start < votes.size()) {
        std::size_t stop = start + 1;
        while (stop < votes.size() && votes[stop].first - votes[stop - 1].first <= merge_tol) {
            ++stop;
        }
        std::vector<std::size_t> voters;
        double sum = 0.0;
        for (std::size_t k = start; k < stop; ++k) {
            voters.push_back(votes[k].second);
            sum += votes[k].first;
        }
        std::sort(voters.begin(), voters.end());
        const auto support = std::unique(voters.begin(), voters.end()) - voters.begin();
        if (static_cast<double>(support) >= needed) {
            out.push_back(sum / static_cast<double>(stop - start));
        }
        start = stop;
    }
    return out;
}

namespace {

std::vector<Index> pick_nodes(Index num_nodes, int count, std::uint64_t seed)
{
    std::vector<Index> pool(static_cast<std::size_t>(num_nodes));
    std::iota(pool.begin(), pool.end(), Index{0});
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(count), pool.size());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

RobustSplitResult robust_split_detailed(const SnapshotMatrix& data, const NsplitConfig& cfg,
                                        std::ostream* log)
{
    cfg.validate();
    data.validate();
    RobustSplitResult result;
    result.splits = SplitSet::whole(data.t_begin(), data.t_end());
    if (data.num_snapshots() < 2) {
        return result;
    }

    const SplitSet initial = SplitSet::even(data.t_begin(), data.t_end(), cfg.initial_num_splits);
    result.nodes = pick_nodes(data.num_nodes(), cfg.num_x_tests, cfg.rng_seed);
    std::vector<SplitSet> proposals;
    for (const Index node : result.nodes) {
        result.runs.push_back(n_split(data, node, initial, cfg, log));
        proposals.push_back(result.runs.back().splits);
    }

    const double horizon = data.t_end() - data.t_begin();
    const double merge_tol = cfg.merge_tol(horizon);
    Columns lines{0};
    for (const double t : consensus_lines(proposals, cfg.consensus_threshold, merge_tol)) {
        const Index c = data.nearest_column(t);
        if (c > lines.back() && c < data.num_snapshots() - 1) {
            lines.push_back(c);
        }
    }
    lines.push_back(data.num_snapshots() - 1);

    std::vector<Segmenter> segs;
    for (const Index node : result.nodes) {
        segs.emplace_back(data, node, 0, data.num_snapshots() - 1, cfg, nullptr);
    }
    const double needed = cfg.consensus_threshold * static_cast<double>(segs.size()) - 1e-12;
    for (bool changed = true; changed;) {
        changed = false;
        Columns kept{lines.front()};
        const std::size_t n = lines.size() - 1;
        for (std::size_t k = 1; k < n; ++k) {
            int votes = 0;
            for (const auto& seg : segs) {
                votes += seg.eps() > 0.0 && seg.test_line(lines[k - 1], lines[k], lines[k + 1],
                                                          k + 1 == n);
            }
            if (votes >= needed) {
                kept.push_back(lines[k]);
            } else {
                changed = true;
            }
        }
        kept.push_back(lines.back());
        lines = std::move(kept);
    }
    result.splits = to_split_set(data, lines);
    return result;
}

SplitSet robust_split(const SnapshotMatrix& data, const NsplitConfig& cfg, std::ostream* log)
{
    return robust_split_detailed(data, cfg, log).splits;
}

}  // namespace splitdmd

#include "splitdmd/snapshot.hpp"

#include "splitdmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace splitdmd {

double SnapshotMatrix::dt() const
{
    if (t_grid.size() < 2) {
        return 0.0;
    }
    return (t_end() - t_begin()) / static_cast<double>(t_grid.size() - 1);
}

void SnapshotMatrix::validate() const
{
    if (values.rows() != x_grid.size() || values.cols() != t_grid.size()) {
        throw ShapeError("snapshot matrix is " + std::to_string(values.rows()) + "x" +
                         std::to_string(values.cols()) + " but grids have " +
                         std::to_string(x_grid.size()) + " nodes and " +
                         std::to_string(t_grid.size()) + " times");
    }
    if (values.size() == 0) {
        throw ShapeError("snapshot matrix is empty");
    }
    if (!values.allFinite()) {
        throw DomainError("snapshot matrix contains non-finite values");
    }
    for (Index i = 1; i < x_grid.size(); ++i) {
        if (!(x_grid(i) > x_grid(i - 1))) {
            throw DomainError("x_grid is not strictly ascending");
        }
    }
    const double h = dt();
    for (Index k = 1; k < t_grid.size(); ++k) {
        const double step = t_grid(k) - t_grid(k - 1);
        if (!(step > 0.0) || std::abs(step - h) > 1e-9 * std::abs(h)) {
            throw DomainError("t_grid is not uniformly spaced at index " + std::to_string(k));
        }
    }
}

std::pair<Index, Index> SnapshotMatrix::columns_in(double t_a, double t_b) const
{
    const double slack = 1e-9 * std::max(dt(), 1e-300);
    const double* begin = t_grid.data();
    const double* end = begin + t_grid.size();
    const auto first = std::lower_bound(begin, end, t_a - slack) - begin;
    const auto past = std::upper_bound(begin, end, t_b + slack) - begin;
    if (past <= first) {
        throw EmptyIntervalError("no snapshot columns in [" + std::to_string(t_a) + ", " +
                                 std::to_string(t_b) + "]");
    }
    return {static_cast<Index>(first), static_cast<Index>(past - 1)};
}

Index SnapshotMatrix::nearest_column(double t) const
{
    const double h = dt();
    if (h <= 0.0) {
        return 0;
    }
    const double pos = std::round((t - t_begin()) / h);
    return static_cast<Index>(std::clamp(pos, 0.0, static_cast<double>(num_snapshots() - 1)));
}

SnapshotMatrix SnapshotMatrix::block(Index first, Index last) const
{
    if (first < 0 || last >= num_snapshots() || last < first) {
        throw IndexError("column block [" + std::to_string(first) + ", " + std::to_string(last) +
                         "] outside 0.." + std::to_string(num_snapshots() - 1));
    }
    const Index count = last - first + 1;
    return SnapshotMatrix{values.middleCols(first, count), x_grid, t_grid.segment(first, count)};
}

}  // namespace splitdmd

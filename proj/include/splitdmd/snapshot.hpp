#pragma once

#include <Eigen/Dense>

#include <utility>

namespace splitdmd {

using Index = Eigen::Index;

/// Space-by-time data grid: values(i, k) is the state at node x_grid(i) and
/// time t_grid(k). The time grid is uniform.
struct SnapshotMatrix {
    Eigen::MatrixXd values;
    Eigen::VectorXd x_grid;
    Eigen::VectorXd t_grid;

    Index num_nodes() const { return values.rows(); }
    Index num_snapshots() const { return values.cols(); }
    double t_begin() const { return t_grid(0); }
    double t_end() const { return t_grid(t_grid.size() - 1); }
    /// Snapshot spacing; zero for a single-column matrix.
    double dt() const;

    /// Throws ShapeError / DomainError when the type invariants are broken.
    void validate() const;

    /// Inclusive column range [first, last] of snapshots with t in [t_a, t_b].
    /// Throws EmptyIntervalError when no column falls inside.
    std::pair<Index, Index> columns_in(double t_a, double t_b) const;

    /// Column whose time is closest to t.
    Index nearest_column(double t) const;

    /// Copy of the columns first..last inclusive.
    SnapshotMatrix block(Index first, Index last) const;
};

}  // namespace splitdmd

#pragma once

#include "splitdmd/snapshot.hpp"

#include <complex>

namespace splitdmd {

/// Rank-r exponential model of one time interval:
///
///     z(t) ~ modes * (amplitudes .* exp(cont_eigs * (t - t_start)))
struct DmdModel {
    Eigen::MatrixXcd modes;
    Eigen::VectorXcd cont_eigs;
    Eigen::VectorXcd amplitudes;
    double dt = 0.0;
    double t_start = 0.0;

    Index rank() const { return cont_eigs.size(); }
    /// exp(omega * dt), the one-step eigenvalues.
    Eigen::VectorXcd discrete_eigs() const;
};

struct ErrorReport {
    double final_residual_2norm = 0.0;
    double rel_frobenius = 0.0;
    double wall_time_seconds = 0.0;
};

/// Everything exact DMD computes on the way to the model; tests use the
/// reduced operator and its eigenvectors.
struct ExactDmdResult {
    DmdModel model;
    Eigen::MatrixXd reduced_operator;
    Eigen::MatrixXcd reduced_eigvecs;
    Eigen::VectorXcd discrete_eigs;
    Eigen::VectorXd singular_values;
};

/// Numerical rank of a matrix from its singular values, using the usual
/// max(rows, cols) * eps * sigma_max cutoff.
Index numerical_rank(const Eigen::VectorXd& singular_values, Index rows, Index cols);

ExactDmdResult exact_dmd_full(const SnapshotMatrix& data, Index rank);

/// Exact DMD: X = columns 0..n-2, Y = columns 1..n-1, rank-r SVD of X,
/// projected operator U* Y V / S, Y-side modes and least-squares amplitudes
/// on the first column.
///
/// Throws ShapeError for fewer than two columns and RankError when the rank
/// exceeds what X supports or an eigenvalue is numerically zero.
DmdModel exact_dmd(const SnapshotMatrix& data, Index rank);

/// Column k is modes * (amplitudes .* exp(cont_eigs * (t_k - t_start))).
Eigen::MatrixXcd reconstruct(const DmdModel& model, const Eigen::VectorXd& t_grid);

ErrorReport error_report(const Eigen::MatrixXd& data, const Eigen::MatrixXd& approx,
                         double wall_time_seconds);
ErrorReport error_report(const SnapshotMatrix& data, const Eigen::MatrixXd& approx,
                         double wall_time_seconds);

}  // namespace splitdmd

#include "splitdmd/dmd.hpp"

#include "splitdmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace splitdmd {

Index numerical_rank(const Eigen::VectorXd& singular_values, Index rows, Index cols)
{
    if (singular_values.size() == 0 || singular_values(0) <= 0.0) {
        return 0;
    }
    const double cutoff = static_cast<double>(std::max(rows, cols)) *
                          std::numeric_limits<double>::epsilon() * singular_values(0);
    Index count = 0;
    for (Index i = 0; i < singular_values.size(); ++i) {
        if (singular_values(i) > cutoff) {
            ++count;
        }
    }
    return count;
}

Eigen::VectorXcd DmdModel::discrete_eigs() const
{
    return (cont_eigs * dt).array().exp().matrix();
}

ExactDmdResult exact_dmd_full(const SnapshotMatrix& data, Index rank)
{
    const Index m = data.num_nodes();
    const Index n = data.num_snapshots();
    if (n < 2) {
        throw ShapeError("exact DMD needs at least two snapshots, got " + std::to_string(n));
    }
    if (rank < 1) {
        throw RankError("rank must be positive", 0);
    }
    const Index max_rank = std::min(m, n - 1);
    if (rank > max_rank) {
        throw RankError("rank " + std::to_string(rank) + " exceeds min(rows, snapshots - 1) = " +
                            std::to_string(max_rank),
                        max_rank);
    }

    // Tall snapshot blocks are compressed to the triangular factor of a QR
    // decomposition; every reduced quantity is invariant under the
    // orthogonal factor.
    Eigen::MatrixXd work;
    if (m > 2 * n) {
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(data.values);
        work = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    } else {
        work = data.values;
    }

    const auto x = work.leftCols(n - 1);
    const auto y = work.rightCols(n - 1);
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();

    const Index achievable = numerical_rank(sigma, m, n - 1);
    if (rank > achievable) {
        throw RankError("rank " + std::to_string(rank) + " exceeds the numerical rank " +
                            std::to_string(achievable) + " of the snapshot matrix",
                        achievable);
    }

    const Eigen::MatrixXd u = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd v_scaled =
        svd.matrixV().leftCols(rank) * sigma.head(rank).cwiseInverse().asDiagonal();

    const Eigen::MatrixXd yvs = y * v_scaled;
    Eigen::MatrixXd a_tilde = u.transpose() * yvs;

    Eigen::EigenSolver<Eigen::MatrixXd> eig(a_tilde);
    if (eig.info() != Eigen::Success) {
        throw RankError("eigen-decomposition of the reduced operator failed", achievable);
    }
    const Eigen::VectorXcd lambda = eig.eigenvalues();
    const Eigen::MatrixXcd w = eig.eigenvectors();

    const double dt = data.dt();
    Eigen::VectorXcd omega(rank);
    for (Index j = 0; j < rank; ++j) {
        if (std::abs(lambda(j)) <= 1e-14) {
            throw RankError("DMD eigenvalue " + std::to_string(j) +
                                " is numerically zero; lower the rank",
                            j);
        }
        omega(j) = std::log(lambda(j)) / dt;
    }

    DmdModel model;
    model.modes = (data.values.rightCols(n - 1) * v_scaled).cast<std::complex<double>>() * w;
    model.cont_eigs = omega;
    model.dt = dt;
    model.t_start = data.t_begin();
    const Eigen::MatrixXcd reduced_modes = yvs.cast<std::complex<double>>() * w;
    const Eigen::VectorXcd first = work.col(0).cast<std::complex<double>>();
    model.amplitudes = reduced_modes.completeOrthogonalDecomposition().solve(first);

    return ExactDmdResult{std::move(model), std::move(a_tilde), w, lambda, sigma};
}

DmdModel exact_dmd(const SnapshotMatrix& data, Index rank)
{
    return exact_dmd_full(data, rank).model;
}

Eigen::MatrixXcd reconstruct(const DmdModel& model, const Eigen::VectorXd& t_grid)
{
    Eigen::MatrixXcd dynamics(model.rank(), t_grid.size());
    for (Index k = 0; k < t_grid.size(); ++k) {
        const double elapsed = t_grid(k) - model.t_start;
        dynamics.col(k) =
            model.amplitudes.cwiseProduct((model.cont_eigs * elapsed).array().exp().matrix());
    }
    return model.modes * dynamics;
}

ErrorReport error_report(const Eigen::MatrixXd& data, const Eigen::MatrixXd& approx,
                         double wall_time_seconds)
{
    if (data.rows() != approx.rows() || data.cols() != approx.cols()) {
        throw ShapeError("error report: data is " + std::to_string(data.rows()) + "x" +
                         std::to_string(data.cols()) + ", approximation is " +
                         std::to_string(approx.rows()) + "x" + std::to_string(approx.cols()));
    }
    if (data.size() == 0) {
        throw ShapeError("error report on empty data");
    }
    const Eigen::MatrixXd diff = data - approx;
    const double data_norm = data.norm();
    ErrorReport report;
    report.final_residual_2norm = diff.col(diff.cols() - 1).norm();
    report.rel_frobenius = data_norm > 0.0 ? diff.norm() / data_norm : diff.norm();
    report.wall_time_seconds = wall_time_seconds;
    return report;
}

ErrorReport error_report(const SnapshotMatrix& data, const Eigen::MatrixXd& approx,
                         double wall_time_seconds)
{
    return error_report(data.values, approx, wall_time_seconds);
}

}  // namespace splitdmd

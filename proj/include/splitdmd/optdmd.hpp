#pragma once

#include "splitdmd/dmd.hpp"
#include "splitdmd/lm.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace splitdmd {

/// Variable-projection fit of a time-major data block D (n times x m nodes)
/// by exponentials, D ~ Phi(alpha) B with Phi(alpha)_{kj} = exp(alpha_j tau_k).
/// B is eliminated by linear least squares at every alpha.
struct VarproState {
    Eigen::VectorXcd alpha;
    Eigen::MatrixXcd phi;
    /// Thin SVD of phi.
    Eigen::MatrixXcd u;
    Eigen::VectorXd sigma;
    Eigen::MatrixXcd v;
    /// pinv(phi)^H = U S^+ V^H.
    Eigen::MatrixXcd pinv_h;
    Eigen::MatrixXcd coeffs;
    Eigen::MatrixXcd residual;
    double objective = 0.0;
    /// Set when phi was numerically rank-deficient and a Tikhonov-regularised
    /// pseudo-inverse was used instead.
    bool regularized = false;
};

VarproState varpro_evaluate(const Eigen::MatrixXcd& data, const Eigen::VectorXd& tau,
                            const Eigen::VectorXcd& alpha);

/// Jacobian of the projected residual R(alpha) = (I - P(alpha)) D with
/// respect to the 2r real parameters (Re alpha_0..r-1, Im alpha_0..r-1).
///
/// Each column is a sum of two rank-one n x m matrices,
///     d/dRe a_j : -(P_perp dphi_j) b_j^T - (pinv(phi)^H e_j)(dphi_j^H R)
///     d/dIm a_j : -i (P_perp dphi_j) b_j^T + i (pinv(phi)^H e_j)(dphi_j^H R)
/// with dphi_j = tau .* phi_j, so Gram products and the gradient never need
/// the dense nm x 2r matrix.
class VarproJacobian {
public:
    VarproJacobian(const VarproState& state, const Eigen::VectorXd& tau);

    Index num_params() const { return 2 * rank_; }
    bool regularized() const { return regularized_; }

    /// Dense complex Jacobian, rows ordered as vec(R) (column-major).
    Eigen::MatrixXcd dense() const;
    /// Real Gram matrix Re<J_p, J_q>.
    Eigen::MatrixXd gram() const;
    /// Gradient of F = 1/2 |R|_F^2, i.e. Re<J_p, R>.
    const Eigen::VectorXd& gradient() const { return gradient_; }

private:
    // Column p = coef[p][0] * proj_d[j] b_j^T + coef[p][1] * pinv_h[j] g_j^T.
    std::complex<double> coef(Index p, int term) const;

    Index rank_;
    bool regularized_;
    Eigen::MatrixXcd proj_d_;  // n x r, P_perp dphi_j
    Eigen::MatrixXcd b_rows_;  // m x r, b_j as columns
    Eigen::MatrixXcd pinv_h_;  // n x r
    Eigen::MatrixXcd g_rows_;  // m x r, (dphi_j^H R)^T as columns
    Eigen::VectorXd gradient_;
};

VarproJacobian varpro_jacobian(const VarproState& state, const Eigen::VectorXd& tau);

struct OptDmdResult {
    DmdModel model;
    ErrorReport report;
    Eigen::VectorXcd alpha;
    /// Linear coefficients B (r x m) refit at the returned alpha.
    Eigen::MatrixXcd coeffs;
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    StopReason stop = StopReason::max_iterations;
    /// Set when the run ended without meeting the residual or gradient test.
    bool stagnated = false;
    /// Set when the growth-rate clamp changed an iterate.
    bool clamped = false;
    bool regularized = false;
    std::vector<IterationRecord> history;
    std::vector<double> accepted_objectives;
};

/// Optimized DMD. Initial exponents default to the exact-DMD continuous
/// eigenvalues of the same block. Re(alpha) is clamped to at most 10 / T,
/// T being the block's time span.
///
/// Throws InitError when the objective at the initial point is not finite.
OptDmdResult optdmd(const SnapshotMatrix& data, Index rank,
                    const std::optional<Eigen::VectorXcd>& init = std::nullopt,
                    const VarproConfig& cfg = {}, std::ostream* trace = nullptr);

}  // namespace splitdmd

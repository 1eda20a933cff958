#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

namespace splitdmd {

struct VarproConfig {
    int max_iters = 100;
    double tol_residual = 1e-10;
    double tol_decrease = 1e-10;
    /// Converged once |grad F| <= tol_gradient * (1 + F).
    double tol_gradient = 1e-6;
    double lambda_init = 1.0;
    double lambda_down = 1.0 / 3.0;
    double lambda_up = 3.0;
    double max_lambda = 1e12;

    void validate() const;
};

enum class StopReason {
    residual_tolerance,
    gradient_tolerance,
    decrease_tolerance,
    max_iterations,
    damping_overflow,
};

std::string_view to_string(StopReason reason);

struct IterationRecord {
    int iteration = 0;
    double lambda = 0.0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    bool accepted = false;
};

std::ostream& operator<<(std::ostream& os, const IterationRecord& rec);

/// Damped Gauss-Newton step with Marquardt scaling: solves
///
///     (J^T J + lambda diag(J^T J)) d = -J^T r
///
/// as the least-squares problem [J; sqrt(lambda) D] d = [-r; 0] through a
/// column-pivoted QR, never forming J^T J. Returns nullopt when the damped
/// system is numerically singular.
std::optional<Eigen::VectorXd> lm_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                                       double lambda);

/// A small (jac, residual) pair reproducing the normal equations of a larger
/// problem: jac^T jac = G and jac^T residual = g.
struct Linearization {
    Eigen::MatrixXd jac;
    Eigen::VectorXd residual;
};

/// Builds a square Linearization from a Gram matrix and gradient through the
/// symmetric eigen-decomposition of G.
Linearization compress_normal_equations(const Eigen::MatrixXd& gram, const Eigen::VectorXd& gradient);

struct LmOutcome {
    Eigen::VectorXd x;
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    StopReason stop = StopReason::max_iterations;
    std::vector<IterationRecord> history;
    std::vector<double> accepted_objectives;
};

/// Levenberg-Marquardt on F(x) = 1/2 |r(x)|^2.
///
/// Problem must provide
///   double objective(const Eigen::VectorXd& x);       // may return NaN/inf
///   Linearization linearize(const Eigen::VectorXd& x);
///   Eigen::VectorXd project(const Eigen::VectorXd& x); // feasibility map
/// The initial objective must be finite (checked by the caller).
template <class Problem>
LmOutcome levenberg_marquardt(Problem& problem, Eigen::VectorXd x, const VarproConfig& cfg,
                              std::ostream* trace = nullptr)
{
    LmOutcome out;
    double f = problem.objective(x);
    double lambda = cfg.lambda_init;
    out.accepted_objectives.push_back(f);

    auto emit = [&](const IterationRecord& rec) {
        out.history.push_back(rec);
        if (trace != nullptr) {
            *trace << rec << '\n';
        }
    };

    for (int iter = 1;; ++iter) {
        const Linearization lin = problem.linearize(x);
        const Eigen::VectorXd grad = lin.jac.transpose() * lin.residual;
        out.gradient_norm = grad.norm();

        if (std::sqrt(2.0 * f) <= cfg.tol_residual) {
            out.stop = StopReason::residual_tolerance;
            break;
        }
        if (out.gradient_norm <= cfg.tol_gradient * (1.0 + f)) {
            out.stop = StopReason::gradient_tolerance;
            break;
        }
        if (iter > cfg.max_iters) {
            out.stop = StopReason::max_iterations;
            break;
        }
        out.iterations = iter;

        bool accepted = false;
        double f_new = f;
        Eigen::VectorXd x_new;
        while (lambda <= cfg.max_lambda) {
            const auto step = lm_step(lin.jac, lin.residual, lambda);
            if (step) {
                x_new = problem.project(x + *step);
                f_new = problem.objective(x_new);
                if (std::isfinite(f_new) && f_new < f) {
                    accepted = true;
                    emit({iter, lambda, f_new, out.gradient_norm, true});
                    lambda *= cfg.lambda_down;
                    break;
                }
                emit({iter, lambda, f_new, out.gradient_norm, false});
            }
            lambda *= cfg.lambda_up;
        }
        if (!accepted) {
            out.stop = StopReason::damping_overflow;
            break;
        }

        const double decrease = f - f_new;
        x = x_new;
        f = f_new;
        out.accepted_objectives.push_back(f);
        const bool small_residual = std::sqrt(2.0 * f) <= cfg.tol_residual;
        if (small_residual || decrease <= cfg.tol_decrease * f) {
            const Linearization last = problem.linearize(x);
            out.gradient_norm = (last.jac.transpose() * last.residual).norm();
            if (small_residual) {
                out.stop = StopReason::residual_tolerance;
            } else if (out.gradient_norm <= cfg.tol_gradient * (1.0 + f)) {
                out.stop = StopReason::gradient_tolerance;
            } else {
                out.stop = StopReason::decrease_tolerance;
            }
            break;
        }
    }
    out.x = std::move(x);
    out.objective = f;
    return out;
}

}  // namespace splitdmd

#include "splitdmd/optdmd.hpp"

#include "splitdmd/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace splitdmd {

namespace {

using cplx = std::complex<double>;

constexpr double phi_rank_tolerance = 1e-12;

}  // namespace

void VarproConfig::validate() const
{
    if (max_iters < 1) {
        throw ConfigError("max_iters must be positive");
    }
    if (!(tol_residual > 0.0) || !(tol_decrease > 0.0) || !(tol_gradient > 0.0)) {
        throw ConfigError("tolerances must be positive");
    }
    if (!(lambda_init > 0.0) || !(max_lambda > 0.0)) {
        throw ConfigError("lambda_init and max_lambda must be positive");
    }
    if (!(lambda_down > 0.0 && lambda_down < 1.0 && lambda_up > 1.0)) {
        throw ConfigError("need 0 < lambda_down < 1 < lambda_up");
    }
}

std::string_view to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::residual_tolerance:
        return "residual_tolerance";
    case StopReason::gradient_tolerance:
        return "gradient_tolerance";
    case StopReason::decrease_tolerance:
        return "decrease_tolerance";
    case StopReason::max_iterations:
        return "max_iterations";
    case StopReason::damping_overflow:
        return "damping_overflow";
    }
    return "unknown";
}

std::ostream& operator<<(std::ostream& os, const IterationRecord& rec)
{
    return os << "iter=" << rec.iteration << " lambda=" << rec.lambda
              << " objective=" << rec.objective << " grad=" << rec.gradient_norm
              << (rec.accepted ? " accepted" : " rejected");
}

std::optional<Eigen::VectorXd> lm_step(const Eigen::MatrixXd& jac, const Eigen::VectorXd& residual,
                                       double lambda)
{
    if (jac.rows() != residual.size()) {
        throw ShapeError("lm_step: Jacobian has " + std::to_string(jac.rows()) +
                         " rows, residual has " + std::to_string(residual.size()));
    }
    const Index p = jac.cols();
    const Eigen::VectorXd diag = jac.colwise().squaredNorm().transpose();
    const double floor = std::max(diag.maxCoeff(), 1.0) * 1e-300;

    Eigen::MatrixXd augmented(jac.rows() + p, p);
    augmented.topRows(jac.rows()) = jac;
    augmented.bottomRows(p) = (lambda * diag.array().max(floor)).sqrt().matrix().asDiagonal();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(jac.rows() + p);
    rhs.head(jac.rows()) = -residual;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(augmented);
    if (qr.rank() < p) {
        return std::nullopt;
    }
    Eigen::VectorXd step = qr.solve(rhs);
    if (!step.allFinite()) {
        return std::nullopt;
    }
    return step;
}

Linearization compress_normal_equations(const Eigen::MatrixXd& gram, const Eigen::VectorXd& gradient)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const Eigen::MatrixXd& q = eig.eigenvectors();
    const double cutoff = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-15;

    Linearization lin;
    lin.jac = Eigen::MatrixXd::Zero(gram.rows(), gram.cols());
    lin.residual = Eigen::VectorXd::Zero(gram.rows());
    const Eigen::VectorXd qg = q.transpose() * gradient;
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cutoff) {
            const double root = std::sqrt(ev(i));
            lin.jac.row(i) = root * q.col(i).transpose();
            lin.residual(i) = qg(i) / root;
        }
    }
    return lin;
}

VarproState varpro_evaluate(const Eigen::MatrixXcd& data, const Eigen::VectorXd& tau,
                            const Eigen::VectorXcd& alpha)
{
    const Index n = tau.size();
    const Index r = alpha.size();
    if (data.rows() != n) {
        throw ShapeError("varpro: data has " + std::to_string(data.rows()) + " time rows, tau has " +
                         std::to_string(n));
    }

    VarproState st;
    st.alpha = alpha;
    st.phi.resize(n, r);
    for (Index j = 0; j < r; ++j) {
        st.phi.col(j) = (alpha(j) * tau.cast<cplx>()).array().exp().matrix();
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd, Eigen::ColPivHouseholderQRPreconditioner> svd(
        st.phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    st.u = svd.matrixU();
    st.v = svd.matrixV();
    st.sigma = svd.singularValues();

    const double smax = st.sigma.size() > 0 ? st.sigma(0) : 0.0;
    const double mu = phi_rank_tolerance * smax;
    Eigen::VectorXd sinv(r);
    st.regularized = false;
    for (Index i = 0; i < r; ++i) {
        if (st.sigma(i) <= mu) {
            st.regularized = true;
        }
    }
    for (Index i = 0; i < r; ++i) {
        const double s = st.sigma(i);
        sinv(i) = st.regularized ? s / (s * s + mu * mu) : 1.0 / s;
    }

    st.pinv_h = st.u * sinv.asDiagonal() * st.v.adjoint();
    const Eigen::MatrixXcd uhd = st.u.adjoint() * data;
    st.coeffs = st.v * sinv.asDiagonal() * uhd;
    st.residual = data - st.phi * st.coeffs;
    st.objective = 0.5 * st.residual.squaredNorm();
    return st;
}

VarproJacobian::VarproJacobian(const VarproState& st, const Eigen::VectorXd& tau)
    : rank_(st.alpha.size()), regularized_(st.regularized)
{
    const Index r = rank_;
    const Eigen::MatrixXcd dphi = tau.cast<cplx>().asDiagonal() * st.phi;

    // P_perp x = x - U diag(s s^+) U^H x; s s^+ is 1 unless regularised.
    Eigen::VectorXd keep(r);
    const double mu = phi_rank_tolerance * (r > 0 ? st.sigma(0) : 0.0);
    for (Index i = 0; i < r; ++i) {
        const double s = st.sigma(i);
        keep(i) = regularized_ ? s * s / (s * s + mu * mu) : 1.0;
    }
    proj_d_ = dphi - st.u * (keep.asDiagonal() * (st.u.adjoint() * dphi));
    b_rows_ = st.coeffs.transpose();
    pinv_h_ = st.pinv_h;
    g_rows_ = (dphi.adjoint() * st.residual).transpose();

    // <x y^T, R> = x^H R conj(y)
    const Eigen::MatrixXcd ar = proj_d_.adjoint() * st.residual;
    const Eigen::MatrixXcd cr = pinv_h_.adjoint() * st.residual;
    const Eigen::VectorXcd v0 = ar.cwiseProduct(b_rows_.adjoint()).rowwise().sum();
    const Eigen::VectorXcd v1 = cr.cwiseProduct(g_rows_.adjoint()).rowwise().sum();
    gradient_.resize(2 * r);
    for (Index p = 0; p < 2 * r; ++p) {
        const Index j = p % r;
        gradient_(p) = (std::conj(coef(p, 0)) * v0(j) + std::conj(coef(p, 1)) * v1(j)).real();
    }
}

cplx VarproJacobian::coef(Index p, int term) const
{
    if (p < rank_) {
        return {-1.0, 0.0};
    }
    return term == 0 ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
}

Eigen::MatrixXcd VarproJacobian::dense() const
{
    const Index n = proj_d_.rows();
    const Index m = b_rows_.rows();
    Eigen::MatrixXcd out(n * m, 2 * rank_);
    for (Index p = 0; p < 2 * rank_; ++p) {
        const Index j = p % rank_;
        const Eigen::MatrixXcd col = coef(p, 0) * proj_d_.col(j) * b_rows_.col(j).transpose() +
                                     coef(p, 1) * pinv_h_.col(j) * g_rows_.col(j).transpose();
        out.col(p) = Eigen::Map<const Eigen::VectorXcd>(col.data(), n * m);
    }
    return out;
}

Eigen::MatrixXd VarproJacobian::gram() const
{
    // <x y^T, x' y'^T> = (x^H x') (y^H y')
    const Eigen::MatrixXcd m00 =
        (proj_d_.adjoint() * proj_d_).cwiseProduct(b_rows_.adjoint() * b_rows_);
    const Eigen::MatrixXcd m01 =
        (proj_d_.adjoint() * pinv_h_).cwiseProduct(b_rows_.adjoint() * g_rows_);
    const Eigen::MatrixXcd m11 =
        (pinv_h_.adjoint() * pinv_h_).cwiseProduct(g_rows_.adjoint() * g_rows_);
    const Eigen::MatrixXcd m10 = m01.adjoint();

    const Index np = 2 * rank_;
    Eigen::MatrixXd g(np, np);
    for (Index p = 0; p < np; ++p) {
        const Index j = p % rank_;
        for (Index q = 0; q < np; ++q) {
            const Index l = q % rank_;
            const cplx value = std::conj(coef(p, 0)) * coef(q, 0) * m00(j, l) +
                               std::conj(coef(p, 0)) * coef(q, 1) * m01(j, l) +
                               std::conj(coef(p, 1)) * coef(q, 0) * m10(j, l) +
                               std::conj(coef(p, 1)) * coef(q, 1) * m11(j, l);
            g(p, q) = value.real();
        }
    }
    return 0.5 * (g + g.transpose());
}

VarproJacobian varpro_jacobian(const VarproState& state, const Eigen::VectorXd& tau)
{
    return VarproJacobian(state, tau);
}

namespace {

Eigen::VectorXcd unpack(const Eigen::VectorXd& x)
{
    const Index r = x.size() / 2;
    Eigen::VectorXcd alpha(r);
    for (Index j = 0; j < r; ++j) {
        alpha(j) = {x(j), x(r + j)};
    }
    return alpha;
}

Eigen::VectorXd pack(const Eigen::VectorXcd& alpha)
{
    const Index r = alpha.size();
    Eigen::VectorXd x(2 * r);
    x.head(r) = alpha.real();
    x.tail(r) = alpha.imag();
    return x;
}

class VarproProblem {
public:
    VarproProblem(const Eigen::MatrixXcd& data, Eigen::VectorXd tau, double max_growth)
        : data_(data), tau_(std::move(tau)), max_growth_(max_growth)
    {
    }

    double objective(const Eigen::VectorXd& x) { return state(x).objective; }

    Linearization linearize(const Eigen::VectorXd& x)
    {
        const VarproJacobian jac(state(x), tau_);
        regularized_ = regularized_ || jac.regularized();
        return compress_normal_equations(jac.gram(), jac.gradient());
    }

    Eigen::VectorXd project(const Eigen::VectorXd& x)
    {
        Eigen::VectorXd out = x;
        const Index r = x.size() / 2;
        for (Index j = 0; j < r; ++j) {
            if (out(j) > max_growth_) {
                out(j) = max_growth_;
                clamped_ = true;
            }
        }
        return out;
    }

    const VarproState& state(const Eigen::VectorXd& x)
    {
        if (!cached_ || cached_x_ != x) {
            cache_ = varpro_evaluate(data_, tau_, unpack(x));
            cached_x_ = x;
            cached_ = true;
        }
        return cache_;
    }

    bool clamped() const { return clamped_; }
    bool regularized() const { return regularized_; }

private:
    const Eigen::MatrixXcd& data_;
    Eigen::VectorXd tau_;
    double max_growth_;
    VarproState cache_;
    Eigen::VectorXd cached_x_;
    bool cached_ = false;
    bool clamped_ = false;
    bool regularized_ = false;
};

}  // namespace

OptDmdResult optdmd(const SnapshotMatrix& data, Index rank,
                    const std::optional<Eigen::VectorXcd>& init, const VarproConfig& cfg,
                    std::ostream* trace)
{
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Index n = data.num_snapshots();
    if (rank < 1) {
        throw RankError("rank must be positive", 0);
    }
    if (n < rank + 1) {
        throw ShapeError("optimized DMD at rank " + std::to_string(rank) + " needs at least " +
                         std::to_string(rank + 1) + " snapshots, got " + std::to_string(n));
    }

    Eigen::VectorXcd alpha0 = init ? *init : exact_dmd(data, rank).cont_eigs;
    if (alpha0.size() != rank) {
        throw ShapeError("initial exponent vector has " + std::to_string(alpha0.size()) +
                         " entries, expected " + std::to_string(rank));
    }

    const Eigen::VectorXd tau = data.t_grid.array() - data.t_begin();
    const double span = tau(n - 1);
    const Eigen::MatrixXcd time_major = data.values.transpose().cast<cplx>();

    VarproProblem problem(time_major, tau, 10.0 / span);
    const Eigen::VectorXd x0 = problem.project(pack(alpha0));
    if (!std::isfinite(problem.objective(x0))) {
        throw InitError("optimized DMD objective is not finite at the initial exponents");
    }

    LmOutcome lm = levenberg_marquardt(problem, x0, cfg, trace);
    const VarproState& final_state = problem.state(lm.x);

    OptDmdResult out;
    out.alpha = final_state.alpha;
    out.coeffs = final_state.coeffs;
    out.objective = lm.objective;
    out.gradient_norm = lm.gradient_norm;
    out.iterations = lm.iterations;
    out.stop = lm.stop;
    out.stagnated = !(lm.stop == StopReason::residual_tolerance ||
                      lm.stop == StopReason::gradient_tolerance);
    out.clamped = problem.clamped();
    out.regularized = problem.regularized() || final_state.regularized;
    out.history = std::move(lm.history);
    out.accepted_objectives = std::move(lm.accepted_objectives);

    DmdModel& model = out.model;
    model.cont_eigs = out.alpha;
    model.dt = data.dt();
    model.t_start = data.t_begin();
    model.modes.resize(data.num_nodes(), rank);
    model.amplitudes.resize(rank);
    for (Index j = 0; j < rank; ++j) {
        const Eigen::VectorXcd b = out.coeffs.row(j).transpose();
        const double norm = b.norm();
        model.amplitudes(j) = norm;
        model.modes.col(j) = norm > 0.0 ? (b / norm).eval() : b;
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.report = error_report(data, reconstruct(model, data.t_grid).real(), elapsed);
    return out;
}

}  // namespace splitdmd

#include "splitdmd/ks_solver.hpp"

#include "splitdmd/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace splitdmd {

namespace {

using cplx = std::complex<double>;

constexpr double two_pi = 2.0 * std::numbers::pi;

bool is_integer_ratio(double num, double den)
{
    const double q = num / den;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q);
}

// Exponential integrator coefficients for one step of size h, evaluated by
// contour averaging around h*L to avoid cancellation near L = 0.
struct EtdCoefficients {
    std::vector<double> e, e_half, q, f1, f2, f3;

    EtdCoefficients(const std::vector<double>& lin, double h)
    {
        constexpr int contour_points = 64;
        const std::size_t n = lin.size();
        e.resize(n);
        e_half.resize(n);
        q.resize(n);
        f1.resize(n);
        f2.resize(n);
        f3.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double hl = h * lin[k];
            e[k] = std::exp(hl);
            e_half[k] = std::exp(hl / 2.0);
            cplx sq{}, s1{}, s2{}, s3{};
            for (int j = 0; j < contour_points; ++j) {
                const double theta = std::numbers::pi * (j + 0.5) / contour_points;
                const cplx z = hl + std::polar(1.0, theta);
                const cplx ez = std::exp(z);
                const cplx z3 = z * z * z;
                sq += (std::exp(z / 2.0) - 1.0) / z;
                s1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                s2 += (2.0 + z + ez * (z - 2.0)) / z3;
                s3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            // Upper half-circle only; the real part of the mean over the
            // full circle equals the real part over half of it.
            q[k] = h * sq.real() / contour_points;
            f1[k] = h * s1.real() / contour_points;
            f2[k] = h * s2.real() / contour_points;
            f3[k] = h * s3.real() / contour_points;
        }
    }
};

class KsIntegrator {
public:
    KsIntegrator(const KsConfig& config, bool nonlinear)
        : n_(config.num_nodes), modes_(config.num_nodes / 2 + 1), eps_(config.epsilon()),
          nonlinear_(nonlinear), lin_(linear_operator(eps_, modes_)), deriv_(modes_),
          keep_(modes_), coef_(lin_, config.dt_int), real_buf_(n_), spec_buf_(modes_)
    {
        // 2/3 rule: modes with 3k >= n are aliased by the quadratic product.
        for (std::size_t k = 0; k < modes_; ++k) {
            keep_[k] = 3 * static_cast<long>(k) < n_;
            deriv_[k] = keep_[k] ? cplx(0.0, two_pi * static_cast<double>(k)) : cplx(0.0, 0.0);
        }
        fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    }

    std::vector<cplx> to_spectral(const Eigen::VectorXd& w)
    {
        std::vector<double> in(w.data(), w.data() + w.size());
        std::vector<cplx> out;
        fft_.fwd(out, in);
        out.resize(modes_);
        return out;
    }

    void to_physical(const std::vector<cplx>& v, Eigen::VectorXd& w)
    {
        fft_.inv(real_buf_, v, n_);
        w = Eigen::Map<const Eigen::VectorXd>(real_buf_.data(), n_);
    }

    void step(std::vector<cplx>& v)
    {
        const std::size_t m = modes_;
        if (!nonlinear_) {
            for (std::size_t k = 0; k < m; ++k) {
                v[k] *= coef_.e[k];
            }
            return;
        }
        std::vector<cplx> nv(m), na(m), nb(m), nc(m), a(m), b(m), c(m);
        nonlinear_term(v, nv);
        for (std::size_t k = 0; k < m; ++k) {
            a[k] = coef_.e_half[k] * v[k] + coef_.q[k] * nv[k];
        }
        nonlinear_term(a, na);
        for (std::size_t k = 0; k < m; ++k) {
            b[k] = coef_.e_half[k] * v[k] + coef_.q[k] * na[k];
        }
        nonlinear_term(b, nb);
        for (std::size_t k = 0; k < m; ++k) {
            c[k] = coef_.e_half[k] * a[k] + coef_.q[k] * (2.0 * nb[k] - nv[k]);
        }
        nonlinear_term(c, nc);
        for (std::size_t k = 0; k < m; ++k) {
            v[k] = coef_.e[k] * v[k] + nv[k] * coef_.f1[k] + 2.0 * (na[k] + nb[k]) * coef_.f2[k] +
                   nc[k] * coef_.f3[k];
        }
    }

    // Share of spectral energy carried by the upper third of the kept band.
    double tail_energy(const std::vector<cplx>& v) const
    {
        std::size_t kmax = 0;
        for (std::size_t k = 0; k < modes_; ++k) {
            if (keep_[k]) {
                kmax = k;
            }
        }
        const std::size_t tail_start = (2 * kmax) / 3 + 1;
        double total = 0.0;
        double tail = 0.0;
        for (std::size_t k = 1; k <= kmax; ++k) {
            const double e = std::norm(v[k]);
            total += e;
            if (k >= tail_start) {
                tail += e;
            }
        }
        return total > 0.0 ? tail / total : 0.0;
    }

private:
    static std::vector<double> linear_operator(double eps, std::size_t modes)
    {
        std::vector<double> lin(modes);
        for (std::size_t k = 0; k < modes; ++k) {
            lin[k] = dispersion_rate(eps, static_cast<double>(k));
        }
        return lin;
    }

    // -2 eps w w_x = -eps (w^2)_x
    void nonlinear_term(const std::vector<cplx>& v, std::vector<cplx>& out)
    {
        fft_.inv(real_buf_, v, n_);
        for (double& value : real_buf_) {
            value *= value;
        }
        fft_.fwd(spec_buf_, real_buf_);
        for (std::size_t k = 0; k < modes_; ++k) {
            out[k] = -eps_ * deriv_[k] * spec_buf_[k];
        }
    }

    long n_;
    std::size_t modes_;
    double eps_;
    bool nonlinear_;
    std::vector<double> lin_;
    std::vector<cplx> deriv_;
    std::vector<bool> keep_;
    EtdCoefficients coef_;
    Eigen::FFT<double> fft_;
    std::vector<double> real_buf_;
    std::vector<cplx> spec_buf_;
};

}  // namespace

double nondimensionalize(double length)
{
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw DomainError("domain length must be positive, got " + std::to_string(length));
    }
    return 1.0 / (length * length);
}

double KsConfig::epsilon() const { return nondimensionalize(length); }

long KsConfig::steps_per_output() const { return std::lround(dt_out / dt_int); }

long KsConfig::num_outputs() const { return std::lround(final_time / dt_out) + 1; }

int KsConfig::min_nodes() const
{
    const int unstable = static_cast<int>(std::ceil(length / two_pi));
    return std::max(16, 4 * unstable);
}

void KsConfig::validate() const
{
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw ConfigError("length must be positive");
    }
    if (!(final_time > 0.0) || !(dt_out > 0.0) || !(dt_int > 0.0)) {
        throw ConfigError("final_time, dt_out and dt_int must be positive");
    }
    if (dt_int > dt_out * (1.0 + 1e-12)) {
        throw ConfigError("dt_int must not exceed dt_out");
    }
    if (!is_integer_ratio(dt_out, dt_int)) {
        throw ConfigError("dt_out must be an integer multiple of dt_int");
    }
    if (!is_integer_ratio(final_time, dt_out)) {
        throw ConfigError("final_time must be an integer multiple of dt_out");
    }
    if (!(perturb_amplitude >= 0.0)) {
        throw ConfigError("perturb_amplitude must be non-negative");
    }
    if (num_nodes < min_nodes()) {
        throw ConfigError("num_nodes = " + std::to_string(num_nodes) + " is too coarse for L = " +
                          std::to_string(length) + "; need at least " +
                          std::to_string(min_nodes()));
    }
    if (!(max_tail_energy > 0.0)) {
        throw ConfigError("max_tail_energy must be positive");
    }
}

Eigen::VectorXd periodic_grid(int n)
{
    if (n <= 0) {
        throw DomainError("grid size must be positive");
    }
    return Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1) / n);
}

double dispersion_rate(double epsilon, double k)
{
    const double kappa = two_pi * k;
    return epsilon * kappa * kappa - epsilon * epsilon * kappa * kappa * kappa * kappa;
}

Eigen::VectorXd ic_perturbation(const KsConfig& config)
{
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(config.num_nodes);
    if (config.perturb_amplitude > 0.0) {
        std::mt19937_64 rng(config.rng_seed);
        std::uniform_real_distribution<double> unif(0.0, config.perturb_amplitude);
        for (Index j = 0; j < beta.size(); ++j) {
            beta(j) = unif(rng);
        }
    }
    return beta;
}

double initial_condition(const KsConfig& config, double x)
{
    const double base = std::sin(4.0 * std::numbers::pi * x) / std::sqrt(config.epsilon());
    if (config.perturb_amplitude == 0.0) {
        return base;
    }
    const long n = config.num_nodes;
    const long node = ((std::lround(x * static_cast<double>(n)) % n) + n) % n;
    return base + ic_perturbation(config)(node);
}

Eigen::VectorXd initial_profile(const KsConfig& config)
{
    const Eigen::VectorXd x = periodic_grid(config.num_nodes);
    const double scale = 1.0 / std::sqrt(config.epsilon());
    Eigen::VectorXd w = (4.0 * std::numbers::pi * x).array().sin() * scale;
    return w + ic_perturbation(config);
}

SnapshotMatrix simulate_ks(const KsConfig& config, const SimulationOptions& options)
{
    config.validate();
    Eigen::VectorXd w = options.initial_state ? *options.initial_state : initial_profile(config);
    if (w.size() != config.num_nodes) {
        throw ShapeError("initial state has " + std::to_string(w.size()) + " entries, expected " +
                         std::to_string(config.num_nodes));
    }

    const long outputs = config.num_outputs();
    const long substeps = config.steps_per_output();

    SnapshotMatrix out;
    out.x_grid = periodic_grid(config.num_nodes);
    out.t_grid = Eigen::VectorXd::LinSpaced(outputs, 0.0, config.dt_out * (outputs - 1));
    out.values.resize(config.num_nodes, outputs);
    out.values.col(0) = w;

    KsIntegrator integrator(config, options.nonlinear);
    std::vector<cplx> v = integrator.to_spectral(w);
    for (long k = 1; k < outputs; ++k) {
        for (long s = 0; s < substeps; ++s) {
            integrator.step(v);
        }
        const double t = out.t_grid(k);
        integrator.to_physical(v, w);
        if (!w.allFinite()) {
            throw IntegrationError("Kuramoto-Sivashinsky state became non-finite at t = " +
                                       std::to_string(t),
                                   t);
        }
        const double tail = integrator.tail_energy(v);
        if (tail > config.max_tail_energy) {
            throw ResolutionError("grid of " + std::to_string(config.num_nodes) +
                                  " nodes under-resolves the solution at t = " + std::to_string(t) +
                                  " (tail energy share " + std::to_string(tail) + ")");
        }
        out.values.col(k) = w;
    }
    return out;
}

}  // namespace splitdmd

#include "splitdmd/errors.hpp"
#include "splitdmd/ks_solver.hpp"

#include <doctest.h>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace splitdmd;

namespace {

// Largest sup-norm distance between two columns of [first, last) after the
// best circular alignment, relative to the global value range of the data.
// Travelling waves have a near-zero diameter; chaotic windows do not.
class AlignedDiameter {
public:
    AlignedDiameter(const SnapshotMatrix& data, Index first)
        : data_(data), first_(first), m_(data.num_nodes())
    {
        range_ = data.values.maxCoeff() - data.values.minCoeff();
        const Index count = data.num_snapshots() - first;
        spectra_.resize(static_cast<std::size_t>(count));
        for (Index j = 0; j < count; ++j) {
            const Eigen::VectorXd col = data.values.col(first + j);
            fft_.fwd(spectra_[static_cast<std::size_t>(j)], col);
        }
        pair_.setZero(count, count);
        for (Index i = 0; i < count; ++i) {
            for (Index j = i + 1; j < count; ++j) {
                pair_(i, j) = pair_(j, i) = distance(i, j);
            }
        }
    }

    double window(Index begin, Index length) const
    {
        return pair_.block(begin - first_, begin - first_, length, length).maxCoeff();
    }

private:
    double distance(Index i, Index j)
    {
        const Eigen::VectorXcd cross = spectra_[static_cast<std::size_t>(i)].cwiseProduct(
            spectra_[static_cast<std::size_t>(j)].conjugate());
        Eigen::VectorXd corr;
        fft_.inv(corr, cross);
        Index shift = 0;
        corr.maxCoeff(&shift);
        double worst = 0.0;
        for (Index q = 0; q < m_; ++q) {
            const double a = data_.values(q, first_ + i);
            const double b = data_.values((q - shift + m_) % m_, first_ + j);
            worst = std::max(worst, std::abs(a - b));
        }
        return worst / range_;
    }

    const SnapshotMatrix& data_;
    Index first_;
    Index m_;
    double range_ = 0.0;
    Eigen::FFT<double> fft_;
    std::vector<Eigen::VectorXcd> spectra_;
    Eigen::MatrixXd pair_;
};

KsConfig short_run(double length = 12.6)
{
    KsConfig cfg;
    cfg.length = length;
    cfg.final_time = 20.0;
    return cfg;
}

}  // namespace

TEST_CASE("nondimensionalize returns 1 / L^2")
{
    CHECK(nondimensionalize(1.0) == 1.0);
    CHECK(nondimensionalize(12.5664) == doctest::Approx(1.0 / (12.5664 * 12.5664)).epsilon(1e-12));
    CHECK(std::abs(nondimensionalize(402.2590) - 0.00000618) <= 1e-3 * 0.00000618);
    CHECK(std::abs(nondimensionalize(4.0 * std::numbers::pi) - 0.00633257) <= 0.5e-8);
    CHECK_THROWS_AS(nondimensionalize(0.0), DomainError);
    CHECK_THROWS_AS(nondimensionalize(-3.0), DomainError);
}

// The tabulated 0.00633257 is 1 / (4 pi)^2 rounded to six digits, while
// 1 / 12.5664^2 = 0.0063325444; the two disagree at the 4e-6 level.
TEST_CASE("tabulated epsilon for L = 12.5664 to 1e-8 relative" * doctest::should_fail())
{
    CHECK(std::abs(nondimensionalize(12.5664) - 0.00633257) <= 1e-8 * 0.00633257);
}

TEST_CASE("config epsilon matches its length")
{
    for (const double L : {1.0, 12.6, 13.2, 402.3}) {
        KsConfig cfg;
        cfg.length = L;
        CHECK(cfg.epsilon() * L * L == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("initial condition examples")
{
    KsConfig cfg;
    cfg.length = 12.5664;
    CHECK(initial_condition(cfg, 0.0) == 0.0);
    CHECK(initial_condition(cfg, 0.125) == doctest::Approx(1.0 / std::sqrt(cfg.epsilon())).epsilon(1e-14));
    CHECK(initial_condition(cfg, 0.125) == doctest::Approx(12.5664).epsilon(1e-12));

    cfg.perturb_amplitude = 0.05;
    cfg.rng_seed = 42;
    const Eigen::VectorXd a = initial_profile(cfg);
    const Eigen::VectorXd b = initial_profile(cfg);
    CHECK(a == b);
    const Eigen::VectorXd beta = ic_perturbation(cfg);
    CHECK(beta.minCoeff() >= 0.0);
    CHECK(beta.maxCoeff() < 0.05);
    CHECK(beta.maxCoeff() > 0.0);

    KsConfig other = cfg;
    other.rng_seed = 43;
    CHECK(ic_perturbation(other) != beta);

    const Eigen::VectorXd x = periodic_grid(cfg.num_nodes);
    for (const Index j : {Index{0}, Index{17}, Index{160}}) {
        CHECK(initial_condition(cfg, x(j)) == doctest::Approx(a(j)).epsilon(1e-14));
    }
}

TEST_CASE("unperturbed initial condition has no noise")
{
    KsConfig cfg;
    CHECK(ic_perturbation(cfg).isZero(0.0));
}

TEST_CASE("zero initial state stays zero")
{
    KsConfig cfg = short_run();
    SimulationOptions options;
    options.initial_state = Eigen::VectorXd::Zero(cfg.num_nodes);
    const SnapshotMatrix z = simulate_ks(cfg, options);
    CHECK(z.values.isZero(0.0));
    CHECK(z.num_snapshots() == 101);
}

TEST_CASE("snapshot grid layout")
{
    const KsConfig cfg = short_run();
    const SnapshotMatrix z = simulate_ks(cfg);
    z.validate();
    CHECK(z.num_nodes() == 161);
    CHECK(z.num_snapshots() == cfg.num_outputs());
    CHECK(z.t_begin() == 0.0);
    CHECK(z.t_end() == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(z.dt() == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(z.values.col(0) == initial_profile(cfg));
}

TEST_CASE("grid stores one period without the duplicated endpoint")
{
    const Eigen::VectorXd x = periodic_grid(161);
    CHECK(x(0) == 0.0);
    CHECK(x(160) == doctest::Approx(160.0 / 161.0).epsilon(1e-15));
    CHECK(x(160) + 1.0 / 161.0 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(periodic_grid(0), DomainError);
}

TEST_CASE("periodic wrap: a circular shift of the initial state shifts the solution")
{
    const KsConfig cfg = short_run();
    const Index m = cfg.num_nodes;
    const Eigen::VectorXd w0 = initial_profile(cfg) +
                               0.3 * (2.0 * std::numbers::pi * periodic_grid(m)).array().cos().matrix();
    Eigen::VectorXd shifted(m);
    for (Index i = 0; i < m; ++i) {
        shifted((i + 1) % m) = w0(i);
    }
    SimulationOptions a;
    a.initial_state = w0;
    SimulationOptions b;
    b.initial_state = shifted;
    const SnapshotMatrix za = simulate_ks(cfg, a);
    const SnapshotMatrix zb = simulate_ks(cfg, b);
    const Index last = za.num_snapshots() - 1;
    Eigen::VectorXd wrapped(m);
    for (Index i = 0; i < m; ++i) {
        wrapped((i + 1) % m) = za.values(i, last);
    }
    CHECK((wrapped - zb.values.col(last)).norm() <= 1e-10 * wrapped.norm());
}

TEST_CASE("identical configs give bitwise identical snapshots")
{
    KsConfig cfg = short_run(13.2);
    cfg.perturb_amplitude = 0.05;
    cfg.rng_seed = 9;
    const SnapshotMatrix a = simulate_ks(cfg);
    const SnapshotMatrix b = simulate_ks(cfg);
    CHECK(a.values == b.values);
    CHECK(a.t_grid == b.t_grid);
    CHECK(a.x_grid == b.x_grid);
}

TEST_CASE("linear growth of a single Fourier mode matches the dispersion relation")
{
    KsConfig cfg;
    cfg.length = 12.6;
    cfg.final_time = 1.0;
    cfg.dt_out = 0.2;
    SimulationOptions options;
    options.nonlinear = false;
    for (const int k : {1, 2, 3}) {
        const Eigen::VectorXd x = periodic_grid(cfg.num_nodes);
        options.initial_state = (2.0 * std::numbers::pi * k * x).array().cos().matrix();
        const SnapshotMatrix z = simulate_ks(cfg, options);
        const double ratio = z.values.col(1).dot(z.values.col(0)) / z.values.col(0).squaredNorm();
        const double rate = std::log(ratio) / cfg.dt_out;
        const double expected = dispersion_rate(cfg.epsilon(), k);
        CHECK(std::abs(rate - expected) <= 1e-6 * std::abs(expected));
        const Eigen::VectorXd residual = z.values.col(1) - ratio * z.values.col(0);
        CHECK(residual.norm() <= 1e-10 * z.values.col(1).norm());
    }
}

TEST_CASE("self-convergence in the pre-chaotic regime")
{
    KsConfig coarse;
    coarse.length = 12.6;
    coarse.final_time = 50.0;
    KsConfig fine = coarse;
    fine.dt_int = coarse.dt_int / 2.0;
    const SnapshotMatrix a = simulate_ks(coarse);
    const SnapshotMatrix b = simulate_ks(fine);
    const Index last = a.num_snapshots() - 1;
    const double rel = (a.values.col(last) - b.values.col(last)).norm() / b.values.col(last).norm();
    CHECK(rel < 1e-4);
}

TEST_CASE("L = 12.6 settles into a low-dimensional regime")
{
    KsConfig cfg;
    cfg.length = 12.6;
    const SnapshotMatrix z = simulate_ks(cfg);
    const Index n = z.num_snapshots();
    const Index window = n / 10;
    const AlignedDiameter diameter(z, n - window);
    CHECK(diameter.window(n - window, window) < 0.1);
}

TEST_CASE("L = 402.3 stays temporally irregular")
{
    KsConfig cfg;
    cfg.length = 402.3;
    cfg.num_nodes = 1024;
    cfg.dt_out = 1.0;
    const SnapshotMatrix z = simulate_ks(cfg);
    const Index n = z.num_snapshots();
    const Index half = (n - 1) / 2;
    const Index window = (n - 1) / 10 + 1;
    const AlignedDiameter diameter(z, half);
    double smallest = 1.0;
    for (Index begin = half; begin + window <= n; ++begin) {
        smallest = std::min(smallest, diameter.window(begin, window));
    }
    CHECK(smallest >= 0.5);
}

TEST_CASE("config validation")
{
    KsConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    KsConfig bad = cfg;
    bad.dt_out = 0.21;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.dt_int = 0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.num_nodes = 15;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.length = 402.3;
    bad.num_nodes = 161;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.perturb_amplitude = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.final_time = 400.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.length = 0.0;
    CHECK_THROWS_AS(simulate_ks(bad), ConfigError);
}

TEST_CASE("initial state of the wrong size")
{
    SimulationOptions options;
    options.initial_state = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(simulate_ks(short_run(), options), ShapeError);
}

TEST_CASE("under-resolved grid raises a resolution error")
{
    KsConfig cfg;
    cfg.length = 402.3;
    cfg.num_nodes = cfg.min_nodes();
    cfg.final_time = 100.0;
    CHECK_THROWS_AS(simulate_ks(cfg), ResolutionError);
}

TEST_CASE("blow-up raises an integration error with its time")
{
    KsConfig cfg;
    cfg.length = 12.6;
    cfg.final_time = 20.0;
    cfg.dt_out = 0.5;
    cfg.dt_int = 0.5;
    cfg.max_tail_energy = 1.0;
    SimulationOptions options;
    options.initial_state = 1e6 * initial_profile(cfg);
    try {
        simulate_ks(cfg, options);
        FAIL("expected an integration error");
    } catch (const IntegrationError& e) {
        CHECK(e.failure_time() > 0.0);
        CHECK(e.failure_time() <= 20.0);
    }
}

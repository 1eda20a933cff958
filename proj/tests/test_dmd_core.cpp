#include "splitdmd/dmd.hpp"
#include "splitdmd/errors.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace splitdmd;
using namespace splitdmd::testing;
using cplx = std::complex<double>;

namespace {

const std::vector<cplx> six_exponents{{-0.05, 0.7}, {-0.2, 1.9}, {0.02, 3.1}};

Eigen::MatrixXd random_matrix(Index rows, Index cols, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            a(i, j) = normal(rng);
        }
    }
    return a;
}

}  // namespace

TEST_CASE("recovers known continuous eigenvalues")
{
    const auto synth = exponential_data(six_exponents, 40, 120, 0.1);
    const DmdModel model = exact_dmd(synth.data, 6);
    CHECK(model.rank() == 6);
    const auto got = sorted(model.cont_eigs);
    const auto want = sorted(synth.omega);
    for (std::size_t j = 0; j < got.size(); ++j) {
        CHECK(std::abs(got[j] - want[j]) <= 1e-8);
    }
    const Eigen::MatrixXd approx = reconstruct(model, synth.data.t_grid).real();
    CHECK(error_report(synth.data, approx, 0.0).rel_frobenius < 1e-10);
}

TEST_CASE("constant data gives a unit eigenvalue")
{
    const Eigen::VectorXd profile = Eigen::VectorXd::LinSpaced(12, -1.0, 2.0);
    const SnapshotMatrix z = make_snapshots(profile.replicate(1, 30), 0.0, 0.5);
    const DmdModel model = exact_dmd(z, 1);
    CHECK(std::abs(model.discrete_eigs()(0) - 1.0) < 1e-12);
    CHECK(std::abs(model.cont_eigs(0)) < 1e-12);
    const Eigen::MatrixXcd rec = reconstruct(model, z.t_grid);
    CHECK((rec.real() - z.values).norm() <= 1e-12 * z.values.norm());
    for (Index k = 1; k < rec.cols(); ++k) {
        CHECK((rec.col(k) - rec.col(0)).norm() <= 1e-12 * rec.col(0).norm());
    }
}

TEST_CASE("rank-r synthetic data reconstructs to machine precision")
{
    for (Index pairs = 1; pairs <= 3; ++pairs) {
        std::vector<cplx> half(six_exponents.begin(), six_exponents.begin() + pairs);
        half.push_back({-0.1, 0.0});
        const auto synth = exponential_data(half, 25, 80, 0.1, 0.0, 11 + pairs);
        const Index r = 2 * pairs + 1;
        const DmdModel model = exact_dmd(synth.data, r);
        const Eigen::MatrixXd approx = reconstruct(model, synth.data.t_grid).real();
        CHECK(error_report(synth.data, approx, 0.0).rel_frobenius < 1e-10);
    }
}

TEST_CASE("reconstruct examples")
{
    const auto synth = exponential_data(six_exponents, 10, 60, 0.1, 2.0);
    const DmdModel model = exact_dmd(synth.data, 6);
    CHECK(model.t_start == 2.0);

    Eigen::VectorXd t0(1);
    t0 << 2.0;
    const Eigen::MatrixXcd first = reconstruct(model, t0);
    CHECK((first.col(0) - model.modes * model.amplitudes).norm() <= 1e-15 * first.norm());

    DmdModel known;
    known.modes = synth.modes;
    known.cont_eigs = synth.omega;
    known.amplitudes = synth.amplitudes;
    known.dt = 0.1;
    known.t_start = 2.0;
    const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(7, 2.0, 5.0);
    const Eigen::MatrixXcd rec = reconstruct(known, times);
    for (Index k = 0; k < times.size(); ++k) {
        Eigen::VectorXcd closed = Eigen::VectorXcd::Zero(10);
        for (Index j = 0; j < 6; ++j) {
            closed += synth.modes.col(j) * synth.amplitudes(j) *
                      std::exp(synth.omega(j) * (times(k) - 2.0));
        }
        CHECK((rec.col(k) - closed).norm() <= 1e-12 * closed.norm());
    }
}

TEST_CASE("error report examples")
{
    Eigen::MatrixXd z(2, 1);
    z << 3.0, 4.0;
    const ErrorReport zero_model = error_report(z, Eigen::MatrixXd::Zero(2, 1), 1.5);
    CHECK(zero_model.final_residual_2norm == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(zero_model.rel_frobenius == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(zero_model.wall_time_seconds == 1.5);

    const Eigen::MatrixXd data = random_matrix(5, 7, 3);
    const ErrorReport exact = error_report(data, data, 0.25);
    CHECK(exact.final_residual_2norm == 0.0);
    CHECK(exact.rel_frobenius == 0.0);
    CHECK(exact.wall_time_seconds == 0.25);
    CHECK(error_report(data, Eigen::MatrixXd::Zero(5, 7), 0.0).rel_frobenius == doctest::Approx(1.0));

    CHECK_THROWS_AS(error_report(data, Eigen::MatrixXd::Zero(5, 6), 0.0), ShapeError);
}

TEST_CASE("linear systems of low rank are reproduced exactly")
{
    const Index m = 30;
    const Index r = 5;
    const Eigen::MatrixXd u = random_matrix(m, r, 21).householderQr().householderQ() *
                              Eigen::MatrixXd::Identity(m, r);
    Eigen::MatrixXd core = random_matrix(r, r, 22);
    core /= core.eigenvalues().cwiseAbs().maxCoeff();
    const Eigen::MatrixXd a = u * core * u.transpose();
    Eigen::MatrixXd values(m, 50);
    values.col(0) = u * random_matrix(r, 1, 23);
    for (Index k = 1; k < values.cols(); ++k) {
        values.col(k) = a * values.col(k - 1);
    }
    const SnapshotMatrix z = make_snapshots(values, 0.0, 1.0);
    const DmdModel model = exact_dmd(z, r);
    const Eigen::MatrixXd approx = reconstruct(model, z.t_grid).real();
    CHECK(error_report(z, approx, 0.0).rel_frobenius < 1e-9);
}

TEST_CASE("reduced eigenpairs, conjugate symmetry and real reconstructions")
{
    const auto synth = exponential_data(six_exponents, 50, 200, 0.05, 0.0, 5);
    Eigen::MatrixXd noisy = synth.data.values + 1e-3 * random_matrix(50, 200, 6);
    const SnapshotMatrix z = make_snapshots(noisy, 0.0, 0.05);
    for (const Index r : {Index{2}, Index{4}, Index{6}, Index{8}}) {
        const ExactDmdResult full = exact_dmd_full(z, r);
        const Eigen::MatrixXcd a = full.reduced_operator.cast<cplx>();
        for (Index j = 0; j < r; ++j) {
            const Eigen::VectorXcd w = full.reduced_eigvecs.col(j);
            CHECK((a * w - full.discrete_eigs(j) * w).norm() <= 1e-10 * w.norm());
        }
        CHECK(conjugate_gap(full.discrete_eigs) <= 1e-10);
        const Eigen::MatrixXcd rec = reconstruct(full.model, z.t_grid);
        CHECK(rec.imag().norm() < 1e-8 * rec.real().norm());
    }
}

TEST_CASE("modes have full column rank and start at the first snapshot")
{
    const auto synth = exponential_data(six_exponents, 30, 90, 0.1);
    const DmdModel model = exact_dmd(synth.data, 6);
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(model.modes);
    const Eigen::VectorXd s = svd.singularValues();
    CHECK(s(s.size() - 1) > 1e-10 * s(0));
    const Eigen::VectorXcd start = model.modes * model.amplitudes;
    CHECK((start.real() - synth.data.values.col(0)).norm() <= 1e-10 * synth.data.values.col(0).norm());
}

TEST_CASE("rank and shape errors")
{
    const auto synth = exponential_data({{-0.1, 1.0}}, 8, 20, 0.1);
    try {
        exact_dmd(synth.data, 4);
        FAIL("expected a rank error");
    } catch (const RankError& e) {
        CHECK(e.achievable_rank() == 2);
    }
    CHECK_THROWS_AS(exact_dmd(synth.data, 30), RankError);
    CHECK_THROWS_AS(exact_dmd(synth.data, 0), RankError);
    const SnapshotMatrix single = synth.data.block(0, 0);
    CHECK_THROWS_AS(exact_dmd(single, 1), ShapeError);

    // A nilpotent shift has zero eigenvalues, which have no logarithm.
    Eigen::MatrixXd shift = Eigen::MatrixXd::Zero(4, 5);
    for (Index k = 0; k < 4; ++k) {
        shift(k, k) = 1.0;
    }
    CHECK_THROWS_AS(exact_dmd(make_snapshots(shift, 0.0, 1.0), 4), RankError);
}

TEST_CASE("tall blocks and wide blocks agree")
{
    const auto synth = exponential_data(six_exponents, 400, 40, 0.1, 0.0, 8);
    const DmdModel tall = exact_dmd(synth.data, 6);
    CHECK(set_distance(tall.cont_eigs, synth.omega) <= 1e-8);
    const Eigen::MatrixXd approx = reconstruct(tall, synth.data.t_grid).real();
    CHECK(error_report(synth.data, approx, 0.0).rel_frobenius < 1e-10);
}

#include "splitdmd/errors.hpp"
#include "splitdmd/optdmd.hpp"
#include "splitdmd/split_dmd.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace splitdmd;
using namespace splitdmd::testing;
using cplx = std::complex<double>;

namespace {

// Two disjoint exponential families, one on each half of [0, 8]. The second
// family starts from the state the first one reaches at t = 4, so both closed
// blocks sharing that column are exactly of rank 4.
SnapshotMatrix two_families()
{
    const auto first = exponential_data({{-0.1, 1.3}, {0.05, 2.9}}, 30, 41, 0.1, 0.0, 1);
    const Eigen::VectorXd joint = first.data.values.col(40);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    Eigen::VectorXd u(30);
    Eigen::VectorXd v(30);
    Eigen::VectorXd w(30);
    for (Index i = 0; i < 30; ++i) {
        u(i) = normal(rng);
        v(i) = normal(rng);
        w(i) = normal(rng);
    }
    const cplx i1{0.0, 1.0};
    const Eigen::VectorXcd phi = (0.5 * joint - u).cast<cplx>() + i1 * v.cast<cplx>();
    const Eigen::VectorXcd psi = u.cast<cplx>() + i1 * w.cast<cplx>();
    const cplx a1{-0.3, 0.5};
    const cplx a2{0.0, 4.2};
    Eigen::MatrixXd values(30, 81);
    values.leftCols(41) = first.data.values;
    for (Index k = 1; k <= 40; ++k) {
        const double tau = 0.1 * static_cast<double>(k);
        values.col(40 + k) = 2.0 * (phi * std::exp(a1 * tau) + psi * std::exp(a2 * tau)).real();
    }
    return make_snapshots(values, 0.0, 0.1);
}

void check_same_model(const DmdModel& a, const DmdModel& b)
{
    CHECK((a.modes - b.modes).norm() <= 1e-12 * a.modes.norm());
    CHECK((a.cont_eigs - b.cont_eigs).norm() <= 1e-12 * a.cont_eigs.norm());
    CHECK((a.amplitudes - b.amplitudes).norm() <= 1e-12 * a.amplitudes.norm());
    CHECK(a.dt == b.dt);
    CHECK(a.t_start == b.t_start);
}

}  // namespace

TEST_CASE("method names")
{
    CHECK(method_from_string("dmd") == Method::standard_dmd);
    CHECK(method_from_string("od") == Method::optimized_dmd);
    CHECK(method_from_string(to_string(Method::optimized_dmd)) == Method::optimized_dmd);
    CHECK_THROWS_AS(method_from_string("svd"), ConfigError);
}

TEST_CASE("whole-horizon split equals the unsplit method")
{
    const auto synth = exponential_data({{-0.05, 0.7}, {-0.2, 1.9}}, 20, 60, 0.1);
    const SnapshotMatrix noisy = make_snapshots(
        synth.data.values + 0.01 * Eigen::MatrixXd::Random(20, 60), 0.0, 0.1);
    SplitDmdOptions options;
    options.rank = 4;
    options.splits = SplitSet::whole(0.0, noisy.t_end());

    options.method = Method::standard_dmd;
    const SplitDmdResult split = split_dmd(noisy, options);
    REQUIRE(split.model.pieces.size() == 1);
    const DmdModel plain = exact_dmd(noisy, 4);
    check_same_model(split.model.pieces.front(), plain);
    const ErrorReport report =
        error_report(noisy, reconstruct(plain, noisy.t_grid).real(), 0.0);
    CHECK(split.report.rel_frobenius == doctest::Approx(report.rel_frobenius).epsilon(1e-12));
    CHECK(split.report.final_residual_2norm ==
          doctest::Approx(report.final_residual_2norm).epsilon(1e-12));

    options.method = Method::optimized_dmd;
    const SplitDmdResult split_od = split_dmd(noisy, options);
    const OptDmdResult od = optdmd(noisy, 4);
    check_same_model(split_od.model.pieces.front(), od.model);
    CHECK(split_od.model.piece_stop_reasons.front() == to_string(od.stop));
    CHECK(split_od.report.rel_frobenius ==
          doctest::Approx(od.report.rel_frobenius).epsilon(1e-12));
}

TEST_CASE("piecewise exponential data needs the split")
{
    const SnapshotMatrix z = two_families();
    SplitDmdOptions options;
    options.rank = 4;
    options.splits = SplitSet({0.0, 4.0, 8.0});
    const SplitDmdResult split = split_dmd(z, options);
    CHECK(split.report.rel_frobenius < 1e-8);
    CHECK(split.model.pieces.size() == 2);
    CHECK(split.model.pieces[0].t_start == 0.0);
    CHECK(split.model.pieces[1].t_start == doctest::Approx(4.0).epsilon(1e-15));

    const DmdModel whole = exact_dmd(z, 4);
    const ErrorReport unsplit = error_report(z, reconstruct(whole, z.t_grid).real(), 0.0);
    CHECK(unsplit.rel_frobenius > 0.1);

    const Eigen::MatrixXd rec = reconstruct_split(split.model, z.t_grid);
    CHECK((rec - z.values).norm() <= 1e-8 * z.values.norm());
}

TEST_CASE("times on an interior line belong to the right piece")
{
    const SnapshotMatrix z = two_families();
    SplitDmdOptions options;
    options.rank = 4;
    options.splits = SplitSet({0.0, 4.0, 8.0});
    const SplitDmdModel model = split_dmd(z, options).model;
    Eigen::VectorXd t(1);
    t << 4.0;
    const Eigen::MatrixXd at_line = reconstruct_split(model, t);
    const Eigen::VectorXd right = reconstruct(model.pieces[1], t).real();
    const Eigen::VectorXd left = reconstruct(model.pieces[0], t).real();
    CHECK((at_line.col(0) - right).norm() == 0.0);
    CHECK((at_line.col(0) - left).norm() > 0.0);
    t << 8.0;
    CHECK((reconstruct_split(model, t).col(0) - reconstruct(model.pieces[1], t).real()).norm() == 0.0);
    t << 8.5;
    CHECK_THROWS_AS(reconstruct_split(model, t), DomainError);
    t << -0.1;
    CHECK_THROWS_AS(reconstruct_split(model, t), DomainError);
}

TEST_CASE("single-piece reconstruction matches the core reconstruction")
{
    const auto synth = exponential_data({{-0.05, 0.7}}, 10, 30, 0.1);
    SplitDmdOptions options;
    options.rank = 2;
    options.splits = SplitSet::whole(0.0, synth.data.t_end());
    const SplitDmdModel model = split_dmd(synth.data, options).model;
    const Eigen::MatrixXd a = reconstruct_split(model, synth.data.t_grid);
    const Eigen::MatrixXd b = reconstruct(model.pieces.front(), synth.data.t_grid).real();
    CHECK(a == b);
}

TEST_CASE("shift examples")
{
    const SplitSet ten = SplitSet::even(0.0, 400.0, 10);
    CHECK(shift_splits(ten, 0.0) == ten);
    const SplitSet shifted = shift_splits(ten, 3.0);
    CHECK(shifted.front() == 0.0);
    CHECK(shifted.back() == 400.0);
    for (Index k = 1; k <= 9; ++k) {
        CHECK(shifted[k] == doctest::Approx(40.0 * k + 3.0).epsilon(1e-15));
    }
    CHECK(shift_splits(ten, -1.0)[1] == doctest::Approx(39.0));
    CHECK_THROWS_AS(shift_splits(SplitSet({0.0, 10.0, 12.0, 400.0}), 390.0), DomainError);
    CHECK_THROWS_AS(shift_splits(ten, -40.0), DomainError);
    CHECK_THROWS_AS(shift_splits(ten, 45.0), DomainError);
}

TEST_CASE("snapping to snapshots")
{
    const SnapshotMatrix z = two_families();
    const SplitSet snapped = snap_to_snapshots(z, SplitSet({0.0, 3.96, 8.0}));
    CHECK(snapped[1] == z.t_grid(40));
    CHECK_THROWS_AS(snap_to_snapshots(z, SplitSet({0.0, 4.0, 9.0})), DomainError);
    CHECK_THROWS_AS(snap_to_snapshots(z, SplitSet({0.0, 4.0, 4.01, 8.0})), DomainError);
}

TEST_CASE("squared error splits over pieces by ownership and every column has one owner")
{
    const SnapshotMatrix z = two_families();
    const SnapshotMatrix noisy =
        make_snapshots(z.values + 0.05 * Eigen::MatrixXd::Random(30, 81), 0.0, 0.1);
    SplitDmdOptions options;
    options.rank = 3;
    options.splits = SplitSet({0.0, 2.0, 4.5, 8.0});
    const SplitDmdResult result = split_dmd(noisy, options);
    const Eigen::MatrixXd assembled = reconstruct_split(result.model, noisy.t_grid);

    std::vector<int> owners(static_cast<std::size_t>(noisy.num_snapshots()), 0);
    double total = 0.0;
    for (Index p = 0; p < result.model.splits.num_intervals(); ++p) {
        const DmdModel& piece = result.model.pieces[static_cast<std::size_t>(p)];
        const double a = result.model.splits[p];
        const double b = result.model.splits[p + 1];
        const bool last = p + 1 == result.model.splits.num_intervals();
        for (Index k = 0; k < noisy.num_snapshots(); ++k) {
            const double t = noisy.t_grid(k);
            if (t >= a && (t < b || (last && t <= b))) {
                ++owners[static_cast<std::size_t>(k)];
                Eigen::VectorXd tk(1);
                tk << t;
                const Eigen::VectorXd own = reconstruct(piece, tk).real();
                total += (noisy.values.col(k) - own).squaredNorm();
            }
        }
    }
    for (const int count : owners) {
        CHECK(count == 1);
    }
    const double assembled_sq = (noisy.values - assembled).squaredNorm();
    CHECK(std::abs(assembled_sq - total) <= 1e-12 * assembled_sq);
    CHECK(result.report.rel_frobenius ==
          doctest::Approx(std::sqrt(assembled_sq) / noisy.values.norm()).epsilon(1e-12));
}

TEST_CASE("parallel and sequential fits are identical")
{
    const SnapshotMatrix z = two_families();
    const SnapshotMatrix noisy =
        make_snapshots(z.values + 0.05 * Eigen::MatrixXd::Random(30, 81), 0.0, 0.1);
    for (const Method method : {Method::standard_dmd, Method::optimized_dmd}) {
        SplitDmdOptions options;
        options.method = method;
        options.rank = 4;
        options.splits = SplitSet::even(0.0, 8.0, 4);
        const SplitDmdModel seq = split_dmd(noisy, options).model;
        options.workers = 4;
        const SplitDmdModel par = split_dmd(noisy, options).model;
        REQUIRE(seq.pieces.size() == par.pieces.size());
        for (std::size_t p = 0; p < seq.pieces.size(); ++p) {
            CHECK(seq.pieces[p].modes == par.pieces[p].modes);
            CHECK(seq.pieces[p].cont_eigs == par.pieces[p].cont_eigs);
            CHECK(seq.pieces[p].amplitudes == par.pieces[p].amplitudes);
        }
        CHECK(seq.piece_stop_reasons == par.piece_stop_reasons);
    }
}

TEST_CASE("automatic splits come from the robust segmentation")
{
    const SnapshotMatrix z = two_families();
    SplitDmdOptions options;
    options.rank = 2;
    const SplitDmdResult result = split_dmd(z, options);
    CHECK(result.model.splits == robust_split(z, options.nsplit));
    CHECK(result.model.pieces.size() ==
          static_cast<std::size_t>(result.model.splits.num_intervals()));
    CHECK(result.model.segmentation_time_seconds >= 0.0);
    double fits = 0.0;
    for (const double s : result.model.piece_fit_seconds) {
        fits += s;
    }
    CHECK(result.model.total_fit_time_seconds ==
          doctest::Approx(fits + result.model.segmentation_time_seconds));

    options.include_segmentation_time = false;
    const SplitDmdResult without = split_dmd(z, options);
    double fits2 = 0.0;
    for (const double s : without.model.piece_fit_seconds) {
        fits2 += s;
    }
    CHECK(without.model.total_fit_time_seconds == doctest::Approx(fits2));
}

TEST_CASE("subintervals too short for the rank are rejected before fitting")
{
    const SnapshotMatrix z = two_families();
    SplitDmdOptions options;
    options.rank = 6;
    options.splits = SplitSet({0.0, 0.4, 8.0});
    try {
        split_dmd(z, options);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("0.4") != std::string::npos);
    }
}

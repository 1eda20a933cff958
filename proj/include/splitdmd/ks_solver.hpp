#pragma once

#include "splitdmd/snapshot.hpp"

#include <cstdint>
#include <optional>

namespace splitdmd {

/// Kuramoto-Sivashinsky scenario on the unit periodic domain,
///
///     w_t + eps^2 w_xxxx = -2 eps w w_x - eps w_xx,   eps = 1 / L^2,
///
/// with initial state sin(4 pi x) / sqrt(eps) plus an optional uniform
/// per-node perturbation in [0, perturb_amplitude).
struct KsConfig {
    double length = 12.6;
    int num_nodes = 161;
    double final_time = 400.0;
    double dt_out = 0.2;
    double dt_int = 0.025;
    double perturb_amplitude = 0.0;
    std::uint64_t rng_seed = 0;
    /// Largest tolerated share of spectral energy in the upper third of the
    /// dealiased band, checked at every output time.
    double max_tail_energy = 1e-4;

    double epsilon() const;
    /// Output steps between consecutive snapshots.
    long steps_per_output() const;
    long num_outputs() const;
    /// Wavenumbers 2 pi k < L are linearly unstable; the grid must carry
    /// at least four nodes per such wavenumber.
    int min_nodes() const;

    /// Throws ConfigError describing the first violated invariant.
    void validate() const;
};

/// Non-dimensional parameter 1 / L^2. Throws DomainError for L <= 0.
double nondimensionalize(double length);

/// Nodes j / n for j = 0..n-1 (one period, no duplicated endpoint).
Eigen::VectorXd periodic_grid(int n);

/// Linear growth rate of Fourier mode k: eps (2 pi k)^2 - eps^2 (2 pi k)^4.
double dispersion_rate(double epsilon, double k);

/// Per-node perturbation drawn once from rng_seed; all zeros when the
/// amplitude is zero.
Eigen::VectorXd ic_perturbation(const KsConfig& config);

/// Initial state at x in [0, 1). The perturbation is attached to grid nodes,
/// so x is mapped to its nearest node for that term.
double initial_condition(const KsConfig& config, double x);

/// Initial state on the whole grid.
Eigen::VectorXd initial_profile(const KsConfig& config);

struct SimulationOptions {
    bool nonlinear = true;
    /// Replaces the configured initial condition when set.
    std::optional<Eigen::VectorXd> initial_state;
};

/// Fourier pseudo-spectral discretisation in space, ETDRK4 in time with
/// 2/3-rule dealiasing of the quadratic term. Columns are written at
/// t = 0, dt_out, ..., final_time.
///
/// Throws IntegrationError on a non-finite state and ResolutionError when
/// the upper third of the resolved band holds more than max_tail_energy.
SnapshotMatrix simulate_ks(const KsConfig& config, const SimulationOptions& options = {});

}  // namespace splitdmd

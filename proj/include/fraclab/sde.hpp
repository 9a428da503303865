#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fraclab/drift.hpp"
#include "fraclab/rng.hpp"
#include "fraclab/stable_params.hpp"

namespace fraclab {
namespace sde {

// One isotropic alpha-stable increment over a step dt: characteristic
// function e^{-dt |xi|^alpha}. Sampled by subordination: a one-sided
// (alpha/2)-stable clock S (Kanter form of the Chambers-Mallows-Stuck
// sampler) drives a Gaussian, Z = sqrt(2 S) G, which reproduces the symbol
// exactly. alpha = 2 falls back to the plain Gaussian.
void sample_stable_increment(double dt, const StableParams& p, RandomStream& rng,
                             std::span<double> out);

// One-sided stable draw with E[e^{-u S}] = e^{-u^a}, 0 < a < 1.
double sample_one_sided_stable(double a, RandomStream& rng);

struct PathEnsemble {
    int d = 2;
    double dt = 1e-3;
    double T = 1.0;
    std::size_t num_paths = 0;
    std::uint64_t seed = 0;
    std::string drift_id;
    int cutoff_n = 0;    // (n, eps_n) provenance of the mollified drift
    double eps_n = 0.0;
    double box_half = 0.0;

    std::vector<double> terminal;  // num_paths x d, positions at T
    std::size_t escaped = 0;       // paths that left the reference box
    std::vector<double> stored;    // stored_count x (steps+1) x d full paths
    std::size_t stored_count = 0;

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }
};

// Euler-Maruyama for X_{k+1} = X_k - b(t_k, X_k) dt + dZ_k. The drift must be
// a bounded (cutoff) field; raw singular fields are rejected. Identical
// (seed, dt, T, drift) give a bitwise identical ensemble regardless of the
// worker count.
PathEnsemble euler_maruyama(const drift::DriftField& b_n, std::span<const double> x0, double T,
                            double dt, std::size_t num_paths, std::uint64_t seed,
                            const StableParams& params, double box_half = 1e30,
                            std::size_t store_limit = 64);

struct CFPoint {
    double freq = 0.0;      // |xi|
    double empirical = 0.0; // mean of cos(xi . Z)
    double exact = 0.0;     // e^{-dt |xi|^alpha}
    double std_error = 0.0;
};

// Empirical characteristic function of the increment sampler at the given
// radial frequencies.
std::vector<CFPoint> increment_cf_check(double dt, const StableParams& p,
                                        std::span<const double> freqs, std::size_t draws,
                                        std::uint64_t seed);

struct FKResult {
    double mc_mean = 0.0;  // e^{-lambda r} E[g(X_r)]
    double mc_se = 0.0;
    double pde_value = 0.0;
    double discrepancy = 0.0;
};

// E[e^{-lambda r} g(omega_r)] against the evolution-family value v(r, x0).
FKResult feynman_kac_check(const PathEnsemble& e,
                           const std::function<double(std::span<const double>)>& g, double r,
                           double lambda, double pde_value);

struct OccupationTarget {
    std::string id;
    std::function<double(double, std::span<const double>)> eval; // |F|
    double l1_norm = 0.0;      // ||F||_{L^1([0,t] x R^d)}
    double pde_bound = -1.0;   // sup |w| from the backward solve; <0 to skip
};

struct KrylovReport {
    std::string F_id;
    double lhs = 0.0;       // E int_0^t |F(s, omega_s)| ds
    double lhs_se = 0.0;
    double rhs = 0.0;       // l1_norm^{1/p}
    double fitted_C = 0.0;  // lhs / rhs
    double pde_bound = -1.0;
    bool within_pde_bound = true;
};

struct MCSpec {
    std::size_t num_paths = 20000;
    double dt = 2e-3;
    std::uint64_t seed = 7;
};

// Monte Carlo occupation of each F along the drifted paths started at x0,
// compared against the L^1 bound and (when given) the PDE sup bound.
std::vector<KrylovReport> krylov_bound_check(const drift::DriftField& b_n,
                                             std::vector<OccupationTarget> targets, double p,
                                             double t, std::span<const double> x0,
                                             const MCSpec& spec, const StableParams& params);

// Fraction of paths that left the reference box before T; a warning flag is
// raised when it exceeds the threshold.
struct MassReport {
    double escape_fraction = 0.0;
    bool warning = false;
};
MassReport mass_check(const PathEnsemble& e, double threshold = 1e-3);

} // namespace sde
} // namespace fraclab

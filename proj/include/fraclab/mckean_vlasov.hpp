#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fraclab/drift.hpp"
#include "fraclab/grid.hpp"
#include "fraclab/morrey.hpp"
#include "fraclab/solver.hpp"

namespace fraclab {
namespace mv {

// Spatial grid for the mean-field stepper: one time slice of a BoxGrid.
struct SpatialGrid {
    double Lx = 16.0;
    std::size_t Nx = 64;
    int d = 2;

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) s *= Nx;
        return s;
    }
    double dx() const { return Lx / static_cast<double>(Nx); }
    double cell_volume() const { return std::pow(dx(), d); }
    double coord_at(std::size_t i) const {
        return -0.5 * Lx + Lx * static_cast<double>(i) / static_cast<double>(Nx);
    }
};

struct DensityEvolution {
    SpatialGrid grid;
    double dt = 0.0;
    double T = 0.0;
    double lambda = 0.0;                  // damping used when forming xi = e^{-lambda t} rho
    std::vector<std::vector<double>> rho; // one slice per stored time (0, dt, 2dt, ...)
    std::vector<double> mass_drift;       // per-step |mass - 1| before renormalization
    std::vector<double> min_value;        // per-step min of rho (clipping floor report)
    std::vector<std::vector<double>> conv_drift; // b*rho per step, d components interleaved

    std::size_t steps() const { return rho.empty() ? 0 : rho.size() - 1; }
};

struct MeanFieldOptions {
    double dt = 5e-3;
    double T = 0.5;
    double lambda = 1.0;        // bookkeeping damping for the a priori checks
    double cfl_limit = 0.9;     // max |b*rho| dt / dx
    double mass_tol = 1e-6;     // per-step renormalization drift bound
    double negativity_floor = -1e-8;
    bool store_convolutions = true;
};

// Semi-implicit stepping for  d_t rho + (-Delta)^{alpha/2} rho - div[(b*rho) rho] = 0:
// the fractional diffusion is implicit through the spatial multiplier, the
// transport term explicit, the convolution spectral. Throws StepRejection
// with a suggested dt when the CFL control trips.
DensityEvolution meanfield_solve(const drift::DriftField& b_kernel,
                                 const std::function<double(std::span<const double>)>& h,
                                 const SpatialGrid& grid, double alpha,
                                 const MeanFieldOptions& opt);

struct ForwardResult {
    FieldOnGrid eta;
    int series_terms = 0;
    double last_ratio = 0.0;
    double lhs_norm = 0.0;    // ||eta|| in W^{(2/p)(1-1/alpha), p}
    double rhs_norm = 0.0;    // ||A^{-1/p'-1/(alpha p)} delta_0 h||_p
    double constant = 0.0;    // lhs / rhs
    double min_value = 0.0;
};

// Linear forward Kolmogorov equation with frozen drift b:
//   lambda eta + d_t eta + (-Delta)^{alpha/2} eta - div(b eta) = 0, eta(0) = h,
// through the Duhamel series with the exact delta_0 kernels.
ForwardResult forward_kolmogorov_solve(const drift::DriftField& b, const FieldOnGrid& h_spatial,
                                       const solver::SolveOptions& opt);

struct ParticleState {
    std::size_t N = 0;
    int d = 2;
    std::uint64_t seed = 0;
    double kernel_trunc = 0.0;
    std::vector<double> positions; // N x d
};

struct ParticleOptions {
    double dt = 5e-3;
    double T = 0.5;
    double kernel_trunc = -1.0; // <0: one grid cell of the companion grid
    std::size_t snapshot_every = 0; // 0: keep only the final state
};

// Interacting particle system X^i' = -(1/N) sum_j b(X^i - X^j) dt + dZ^i with
// i.i.d. draws from h as initial conditions. Independent stable noises per
// particle; the pair sweep is parallel with a deterministic layout.
std::vector<ParticleState> particle_system_run(const drift::DriftField& b_kernel,
                                               const std::function<double(std::span<const double>)>& h,
                                               const SpatialGrid& sampling_grid, double alpha,
                                               std::size_t N, std::uint64_t seed,
                                               const ParticleOptions& opt);

// Smoothed-L1 distance between the particle empirical measure and the
// mean-field density at matched times: both are mollified with a Gaussian of
// the given bandwidth on the grid and compared in L1.
double propagation_gap(const ParticleState& particles, const DensityEvolution& meanfield,
                       double smoothing);

struct AprioriReport {
    double lhs = 0.0;         // ||xi|| in W^{(2/p)(1-1/alpha),p}
    double rhs_delta = 0.0;   // delta_0-kernel form
    double rhs_lr = 0.0;      // C_1(r) ||h||_{L^r}
    double ratio_delta = 0.0;
    double ratio_lr = 0.0;
    double time_integral_constant = 0.0; // the r-dependent time factor in C_1
};

// A priori regularity bounds for xi = e^{-lambda t} rho: both right-hand
// side forms, with the r-dependent constant computed by quadrature (which
// blows up as r decreases to d p/(d+1)).
AprioriReport apriori_bound_check(const DensityEvolution& evo, double p, double r_exponent,
                                  double alpha, std::size_t nt_pad = 64);

// The r-dependent time-integral constant alone (for the blow-up sweep).
double apriori_time_constant(double p, double r_exponent, double alpha, int d, double lambda);

struct YoungMorreyReport {
    double lhs = 0.0; // sampled parabolic Morrey norm of |b * rho|^{1/(alpha-1)}
    double rhs = 0.0; // elliptic Morrey norm of |b|^{1/(alpha-1)}
    bool holds_on_all_cylinders = true;
    std::size_t cylinders = 0;
};

// || |b * e_lambda xi|^{1/(a-1)} ||_{E_{1+eps}} <= || |b|^{1/(a-1)} ||_{M_{1+eps}},
// checked cylinder by cylinder on the stored convolution field.
YoungMorreyReport young_morrey_check(const drift::DriftField& b_kernel,
                                     const DensityEvolution& evo, double eps, double alpha,
                                     const morrey::MorreyReport& elliptic_rhs);

// second spatial moment of a density slice (min-image distances)
double second_moment(const SpatialGrid& g, std::span<const double> rho);

} // namespace mv
} // namespace fraclab

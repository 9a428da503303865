#pragma once

#include <memory>
#include <span>
#include <vector>

#include "fraclab/stable_params.hpp"

namespace fraclab {
namespace kernels {

// Piecewise comparison kernel
//   p_gamma(t,x) = 1_{t>0} * { t^{g/2} |x|^{-d-alpha}      if |x| >= t^{1/alpha}
//                              t^{g/2 - (d+alpha)/alpha}   if |x| <  t^{1/alpha} }
double comparison_kernel(double t, double abs_x, double gamma, const StableParams& p);

// Isotropic stable transition density q(t,x) with symbol e^{-t|xi|^alpha},
// evaluated by radial Fourier inversion of the self-similar profile
// q(t,x) = t^{-d/alpha} q(1, t^{-1/alpha}|x|). Supports d in {1,2,3}.
class StableDensity {
  public:
    explicit StableDensity(const StableParams& p, double rel_tol = 1e-9);

    double operator()(double t, double abs_x) const;  // q(t,x); 0 for t<=0
    double gradient_magnitude(double t, double abs_x) const; // |grad_x q(t,x)|

    // Radial profile q(1, rho) and its rho-derivative, straight from
    // quadrature (no interpolation table) - used for cross-validation.
    double profile_direct(double rho) const;
    double profile_deriv_direct(double rho) const;

    // Independent second evaluation scheme (trapezoid + Richardson instead of
    // panelled Gauss-Legendre) for the dual-scheme oracle.
    double profile_second_scheme(double rho) const;

    double mass(double abs_tol = 1e-6) const; // integral of q(1,.) over R^d

    const StableParams& params() const { return params_; }

  private:
    double profile(double rho) const;       // table-backed
    double profile_deriv(double rho) const;
    double tail_interp(const std::vector<double>& w, double rho) const;
    void build_tables();

    StableParams params_;
    double rel_tol_;
    // dense head table on [0, head_max]
    double head_max_ = 12.0;
    double head_step_ = 0.0;
    std::vector<double> head_;       // q(1, rho_i)
    std::vector<double> head_deriv_; // d/drho q(1, rho_i)
    // tail stored as w = q1 * rho^{d+alpha} on log-spaced nodes in
    // [head_max, tail_max]; w varies slowly, so linear interpolation in
    // log(rho) is accurate and the far field reduces to a clean power law
    double tail_max_ = 120.0;
    std::size_t tail_n_ = 96;
    std::vector<double> tail_w_;
    std::vector<double> tail_wd_; // q1' * rho^{d+alpha+1}
};

// Exact space-time kernel of (lambda + dt + (-Delta)^{alpha/2})^{-gamma/2}:
//   e^{-lambda t} * t^{gamma/2 - 1} / Gamma(gamma/2) * q(t,x),  t > 0.
double frac_resolvent_kernel(const StableDensity& q, double t, double abs_x, double gamma,
                             double lambda);

// Constant in front of t^{gamma/2-1} q(t,x); kept separate so the spectral
// cross-check can verify the normalization.
double resolvent_constant(double gamma);

struct BoundReport {
    double c_hat = 0.0;   // inf q_gamma / p_gamma over the grid
    double C_hat = 0.0;   // sup q_gamma / p_gamma
    double C1_hat = 0.0;  // sup |grad q_gamma| / p_{gamma - 2/alpha}
    std::size_t points = 0;
};

struct BoundGrid {
    std::vector<double> times;  // all > 0
    std::vector<double> radii;  // |x| values, >= 0
};

// Measures the two-sided and gradient comparison constants on a grid.
BoundReport verify_bounds(const StableDensity& q, double gamma, const BoundGrid& grid);

// Convenience: dyadic-ish default grid on [tmin,tmax] x [0,xmax].
BoundGrid make_bound_grid(double tmin, double tmax, double xmax, int nt, int nx);

} // namespace kernels
} // namespace fraclab

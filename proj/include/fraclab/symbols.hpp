#pragma once

#include <functional>
#include <map>
#include <optional>

#include "fraclab/drift.hpp"
#include "fraclab/grid.hpp"
#include "fraclab/kernels.hpp"

namespace fraclab {
namespace spectral {

// Fractional power of the space-time generator, realized as the Fourier
// multiplier (lambda + i*sign*tau + |xi|^alpha)^{-gamma/2} (principal
// branch). lambda > 0 keeps the real part of the symbol bounded away from
// zero, so the power is well defined for every grid frequency. gamma < 0
// gives the positive (differentiating) powers.
struct SymbolPower {
    double gamma = 2.0;
    double lambda = 1.0;
    int time_sign = +1; // +1 forward d_t, -1 backward -d_t
    double alpha = 1.5;

    void validate() const {
        if (!(lambda > 0.0)) throw ConfigError("SymbolPower: lambda must be > 0");
        if (time_sign != 1 && time_sign != -1) throw ConfigError("SymbolPower: time_sign must be +-1");
    }
};

FieldOnGrid apply_bessel_power(const FieldOnGrid& u, const SymbolPower& pow);
VectorFieldOnGrid apply_bessel_power(const VectorFieldOnGrid& u, const SymbolPower& pow);

// Exact spectral derivative of the trigonometric interpolant; Nyquist modes
// are dropped so real fields map to real fields.
VectorFieldOnGrid apply_gradient(const FieldOnGrid& u);
FieldOnGrid apply_divergence(const VectorFieldOnGrid& v);

// || A^{gamma/2} u ||_p with A = lambda + sign*d_t + (-Delta)^{alpha/2}.
double bessel_norm(const FieldOnGrid& u, double gamma, double p, double lambda, double alpha,
                   int time_sign = +1);

// (lambda + d_t + (-Delta)^{alpha/2})^{-gamma/2} delta_r g:
//   1_{t>r} e^{-lambda(t-r)} t^{gamma/2-1}/Gamma(gamma/2) * e^{-(t-r)(-Delta)^{alpha/2}} g,
// realized per time slice with the exact spatial multiplier; the first nodes
// carry cell-averaged time prefactors so Riemann sums in time stay exact.
FieldOnGrid delta_resolvent(const FieldOnGrid& g_spatial, double r, double gamma,
                            const SymbolPower& base);

// S_p g = grad (lambda + d_t + (-Delta)^{alpha/2})^{-1/p' - 1/(alpha p)} delta_r g.
VectorFieldOnGrid make_Sp(const FieldOnGrid& g_spatial, double r, double p, const SymbolPower& base);

// Linear operator with an explicit adjoint; closures hold immutable sampled
// coefficient fields.
struct LinOp {
    std::function<FieldOnGrid(const FieldOnGrid&)> apply;
    std::function<FieldOnGrid(const FieldOnGrid&)> apply_adjoint;
};

// G_p = b^{1/p} A^{(-1+1/alpha)/p}: scalar -> vector; plus the contraction
// G_p . v used in the evolution representation.
VectorFieldOnGrid apply_Gp(const drift::DriftField& b, double p, const SymbolPower& base,
                           const FieldOnGrid& u);
FieldOnGrid apply_Gp_dot(const drift::DriftField& b, double p, const SymbolPower& base,
                         const VectorFieldOnGrid& v);

// Sampled coefficient bundle shared by solver loops so drifts are sampled
// once per grid.
struct DriftOnGrid {
    VectorFieldOnGrid b_pow;      // b^{1/p}
    FieldOnGrid abs_b_pow_conj;   // |b|^{1/p'}
    double p = 2.0;
};
DriftOnGrid sample_for_p(const drift::DriftField& b, const BoxGrid& g, double p);

// R_p = b^{1/p} . grad A^{-1/alpha + (-1+1/alpha)/p}
LinOp make_Rp(const DriftOnGrid& bg, const SymbolPower& base);
// Q_p = A^{(-1+1/alpha)/p'} |b|^{1/p'} .
LinOp make_Qp(const DriftOnGrid& bg, const SymbolPower& base);
// forward-equation transpose: (Rt v)_i = (b^{1/p})_i * div A^{e_R} v.
std::function<VectorFieldOnGrid(const VectorFieldOnGrid&)> make_Rp_transpose(const DriftOnGrid& bg,
                                                                             const SymbolPower& base);

struct NormEstimate {
    double lower_bound = 0.0;
    int probes = 0;
    bool converged = true;
};

// Certified lower bound of ||op||_{p->p}: power iteration on op*op at p=2
// (relative tolerance 1e-6), Boyd/Higham-style ascent plus random probes for
// p != 2.
NormEstimate operator_norm_estimate(const LinOp& op, const BoxGrid& g, double p, int trials,
                                    std::uint64_t seed = 20240801, int max_iter = 200);

// Random smooth band-limited probe (for weak forms and norm probes).
FieldOnGrid random_smooth_field(const BoxGrid& g, std::uint64_t seed, std::size_t band = 6);

} // namespace spectral
} // namespace fraclab

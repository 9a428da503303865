#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fraclab/drift.hpp"
#include "fraclab/grid.hpp"
#include "fraclab/stable_params.hpp"

namespace fraclab {
namespace morrey {

// C_rho(t,x) = [t, t + rho^alpha] x ball(x, rho).
struct ParabolicCylinder {
    double t = 0.0;
    std::array<double, 3> x{0.0, 0.0, 0.0};
    double rho = 1.0;
    double alpha = 1.5;
    int d = 2;

    double time_extent() const { return std::pow(rho, alpha); }
    double volume() const;
};

// Nonnegative scalar field on space-time with declared singular structure.
// The structure flags let cylinder integrals run through exact radial / slab
// reductions with graded quadrature instead of naive point sampling.
struct ScalarField {
    int d = 2;
    std::function<double(double, std::span<const double>)> eval;

    bool time_independent = true;
    bool space_independent = false;
    bool radial = false; // eval = G(|x - point_loci[0].x|), possibly x time factor
    bool axis = false;   // eval = H(x_axis - offset)

    std::vector<drift::PointLocus> point_loci;
    std::vector<drift::AxisLocus> axis_loci;
    std::vector<drift::TimeLocus> time_loci;

    double operator()(double t, std::span<const double> xs) const { return eval(t, xs); }
};

// |b|^{expo} as a ScalarField, carrying over the drift's singular structure.
ScalarField drift_power_field(const drift::DriftField& b, double expo,
                              bool singular_part_only = false);
ScalarField constant_field(int d, double value);

// integral of f^q over the cylinder (f >= 0). Throws QuadratureFailure when
// graded refinement detects a non-integrable local power.
double cylinder_integral_pow(const ScalarField& f, double q, const ParabolicCylinder& cyl,
                             double rel_tol = 1e-7);

struct SamplingPlan {
    std::vector<double> radii;
    std::vector<double> centers_t;
    std::vector<std::array<double, 3>> centers_x;

    // Dyadic radii 2^lo..2^hi, centers = lattice + declared singular loci.
    static SamplingPlan standard(const ScalarField& f, int d, int lo = -10, int hi = 10);
    SamplingPlan refined() const; // doubles radii density and extends centers
};

struct MorreyReport {
    double norm_estimate = 0.0;   // max over the sampled family; a lower bound
    ParabolicCylinder arg_cylinder;
    std::vector<double> rho_grid;
    std::size_t center_count = 0;
    double q = 1.1;
};

// || v ||_{E_q} = sup_rho,(t,x)  rho (|C|^{-1} int_C |v|^q)^{1/q}, sampled.
MorreyReport parabolic_morrey_norm(const ScalarField& v, double q, const SamplingPlan& plan,
                                   double alpha, double rel_tol = 1e-7);

// Elliptic variant over balls; requires a time-independent field.
MorreyReport elliptic_morrey_norm(const ScalarField& v, double q, const SamplingPlan& plan,
                                  double alpha, double rel_tol = 1e-7);

// Morrey norm of a grid-sampled nonnegative field by cell sums. Used where
// the field only exists on a grid (e.g. convolved drifts).
MorreyReport parabolic_morrey_norm_grid(const FieldOnGrid& v, double q, const SamplingPlan& plan,
                                        double alpha);

struct MaximalValues {
    double M_beta = 0.0;
    double M = 0.0;
    double M_hat = 0.0;
};

// M_beta f (t,x) = sup_rho rho^beta |C_rho|^{-1} int_{C_rho(t,x)} |f|;
// M = M_0; M_hat sups over a sampled family of cylinders containing (t,x).
MaximalValues maximal_functions(const ScalarField& f, double beta, double t,
                                std::span<const double> x, std::span<const double> rho_grid,
                                double alpha, double rel_tol = 1e-6);

struct LemmaCheck {
    double lhs_out = 0.0, lhs_in = 0.0; // P_gamma of the far / near restriction
    double rhs_out = 0.0, rhs_in = 0.0; // rho-power times maximal function
    double K_measured = 0.0, N_measured = 0.0;
    double K_printed = 0.0, N_printed = 0.0; // formulas (K is negative under the
                                             // lemma hypothesis; reported, not asserted)
    double interp_lhs = 0.0, interp_rhs = 0.0, C_measured = 0.0;
};

// Pointwise kernel bounds: P_gamma restricted outside/inside C_rho against
// rho^{alpha gamma/2 - beta} M_beta f and rho^{alpha gamma/2} M f, plus the
// interpolation bound P_gamma f <= C (M_beta f)^{a}(M f)^{1-a}.
LemmaCheck lemma_pointwise_check(const ScalarField& f, double gamma, double beta, double rho,
                                 double t, std::span<const double> x, const StableParams& params,
                                 double rel_tol = 1e-5);

// P_gamma f(t,x) = int p_gamma(s,y) f(t+s, x+y) dy ds  (adjoint: t-s).
double apply_p_gamma(const ScalarField& f, double gamma, double t, std::span<const double> x,
                     const StableParams& params, bool adjoint = false,
                     std::optional<double> restrict_rho = std::nullopt,
                     bool restrict_outside = false, double rel_tol = 1e-5, double s_max = 6.0,
                     double y_max = 8.0);

struct AdamsKrylovResult {
    bool vacuous = false;       // b == 0 or f == 0
    double constant = 0.0;      // empirical constant for the forward kernel
    double constant_adjoint = 0.0;
    double lhs = 0.0;           // <|b| (P_gamma f)^p>
    double lhs_adjoint = 0.0;
    double f_norm = 0.0;
    double morrey_norm = 0.0;   // || |b|^{1/(alpha-1)} ||_{E_{1+eps}} used
};

// Empirical constant of the inequality
//   <|b| (P_{(1-1/alpha)2/p} f)^p>  <=  C^p || |b|^{1/(a-1)} ||_{E_q}^{a-1} ||f||_p^p
// on a grid; the kernel application runs through zero-padded FFT correlation
// with a cell-averaged kernel table.
AdamsKrylovResult adams_krylov_check(const drift::DriftField& b, const FieldOnGrid& f, double p,
                                     const StableParams& params, const MorreyReport& morrey_of_b);

} // namespace morrey
} // namespace fraclab

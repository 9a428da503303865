#pragma once

#include <map>
#include <vector>

#include "fraclab/drift.hpp"
#include "fraclab/grid.hpp"
#include "fraclab/symbols.hpp"

namespace fraclab {
namespace solver {

struct SolveOptions {
    double p = 2.0;
    double lambda = 5.0;
    double tol = 1e-8;
    int max_terms = 80;
    int contraction_window = 5; // increments must start decaying within this many terms
    bool estimate_contraction = true;
    bool compute_residual = true;
    std::uint64_t probe_seed = 977;
};

struct ContractionEstimate {
    double norm_lower_bound = 0.0; // lower bound for ||Q_p R_p|| (or ||R_p Q_p||)
    double last_ratio = 0.0;       // ratio of the final two series increments
};

struct SolveResult {
    FieldOnGrid u;
    int series_terms = 0;
    ContractionEstimate contraction;
    double residual = 0.0;                 // weak-form residual (p=2 pairing)
    std::map<double, double> bessel_norms; // gamma -> ||A^{gamma/2} u||_p
    std::vector<double> increment_norms;
};

// Solution of  lambda u + d_t u + (-Delta)^{alpha/2} u + b.grad u = f  on the
// periodic box through the geometric series
//   u = A^{-1/alpha+(-1+1/alpha)/p} (1 + Q_p R_p)^{-1} A^{(-1+1/alpha)/p'} f.
// Throws NoContraction when the increments fail to decay (Morrey norm of the
// singular part too large for this (p, lambda)).
SolveResult solve_series(const drift::DriftField& b, const FieldOnGrid& f, const SolveOptions& opt);

// Equivalent representation
//   u = A^{-1} f - A^{-1/alpha+(-1+1/alpha)/p} Q_p (1 + R_p Q_p)^{-1} R_p A^{(-1+1/alpha)/p'} f.
SolveResult solve_series_alt(const drift::DriftField& b, const FieldOnGrid& f,
                             const SolveOptions& opt);

// gamma of the solution space: 2/alpha + (alpha-1)/alpha * 2/p.
double solution_space_gamma(double alpha, double p);

struct ApproximationEntry {
    int n = 0;
    double eps_n = 0.0;
    double error = 0.0; // ||u_n - u|| in the solution-space Bessel norm
};

// Solves with the mollified cutoffs b_n and reports the convergence table.
std::vector<ApproximationEntry> approximation_sequence(const drift::DriftField& b,
                                                       const FieldOnGrid& f,
                                                       const SolveOptions& opt,
                                                       const std::vector<int>& n_list);

// Max relative residual of the weak formulation over random smooth probes.
double weak_residual(const FieldOnGrid& u, const drift::DriftField& b, const FieldOnGrid& f,
                     double lambda, int probes = 20, std::uint64_t seed = 977);

struct EvolveResult {
    FieldOnGrid v;       // damped evolution e^{-lambda(t-r)}-weighted
    int series_terms = 0;
    double last_ratio = 0.0;
    double sup_norm = 0.0;       // sup_{t>=r,x} |v|
    double g_w1p_norm = 0.0;     // ||g||_{W^{1,p}} on the spatial grid
    double sup_constant = 0.0;   // sup_norm / g_w1p_norm
};

// v(t) = U^{t,r} g via
//   v = A^{-1} delta_r g - A^{-1/alpha+(-1+1/alpha)/p} Q_p (1+R_pQ_p)^{-1} G_p . S_p g.
// r snaps to the nearest grid time (with a note in the result when it moves).
EvolveResult evolve(const FieldOnGrid& g_spatial, double r, const drift::DriftField& b,
                    const SolveOptions& opt);

// Backward problem -d_t w + (-Delta)^{alpha/2} w + b.grad w = |F| on t <= r,
// w(r,.) = 0, by time reflection onto the forward solver. The damping used
// internally cancels exactly, so w approximates the lambda = 0 solution.
FieldOnGrid terminal_value_solve(const FieldOnGrid& F, double r, const drift::DriftField& b,
                                 const SolveOptions& opt, bool take_abs = true);

struct ConservationRow {
    double R = 0.0;
    double value = 0.0; // sup_{t in [r, r+1]} e^{lambda (t-r)} |v_R(t, x0)|
};

// Evolution applied to plateau data equal to 1 off B_R: the observed value at
// the box center must decay as R grows (probability does not leak in from
// infinity faster than the kernel tail allows).
std::vector<ConservationRow> conservation_probe(const drift::DriftField& b, double r,
                                                const SolveOptions& opt, const BoxGrid& grid,
                                                const std::vector<double>& R_list);

} // namespace solver
} // namespace fraclab

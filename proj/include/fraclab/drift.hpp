#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fraclab/grid.hpp"
#include "fraclab/stable_params.hpp"

namespace fraclab {
namespace drift {

using VecFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;

// Structure hints consumed by the Morrey integrator; they mark where |b|
// blows up so cylinder integrals can be graded (or computed by exact radial
// reductions) instead of naive point sampling.
struct PointLocus {
    std::array<double, 3> x{0.0, 0.0, 0.0};
};
struct AxisLocus {
    int axis = 0;
    double offset = 0.0;
};
struct TimeLocus {
    double t0 = 0.0;
};

// A time-space vector field with a declared split b = b_singular + b_bounded.
// Evaluation at declared singular points returns the zero vector.
struct DriftField {
    int d = 2;
    double alpha = 1.5; // scaling exponent the field was built against

    VecFn eval;                 // total field
    VecFn singular_eval;        // null => whole field is singular part
    VecFn bounded_eval;         // null => bounded part is zero
    double bounded_sup = 0.0;   // declared sup norm of the bounded part

    bool smooth_and_bounded = false;
    bool time_independent = true;
    bool space_independent = false;  // magnitude depends on t only
    bool radial_magnitude = false;   // |b(t,x)| = G(|x - locus|)
    bool axis_magnitude = false;     // |b(t,x)| = H(x_axis - offset)
    bool compact_support = false;

    std::vector<PointLocus> point_loci;
    std::vector<AxisLocus> axis_loci;
    std::vector<TimeLocus> time_loci;

    std::string id = "custom";

    void operator()(double t, std::span<const double> x, std::span<double> out) const { eval(t, x, out); }
    double magnitude(double t, std::span<const double> x) const;
    void singular_at(double t, std::span<const double> x, std::span<double> out) const;
    void bounded_at(double t, std::span<const double> x, std::span<double> out) const;
};

enum class RadialDirection { attracting, repulsing };

// |b(x)| = kappa |x|^{1-alpha}, i.e. b(x) = ±kappa |x|^{-alpha} x.
// `attracting` points toward the origin once the SDE sign convention
// dX = -b dt + dZ is taken into account.
DriftField model_drift_radial(double kappa, RadialDirection dir, const StableParams& p);

// |b(t)| = kappa (t-t0)^{-(alpha-1)/alpha} for t > t0, zero otherwise;
// direction is a fixed unit vector (first axis by default).
DriftField model_drift_time(double kappa, double t0, const StableParams& p, int direction_axis = 0);

// |b(x)| = |x_1|^{-s} along a fixed axis; requires 0 < s < alpha-1.
// An optional truncation radius confines the singular part to a compact box,
// which is what makes the Morrey norm of the singular part finite at large
// radii; pass infinity for the untruncated field.
DriftField model_drift_hypersurface(double s, const StableParams& p, int direction_axis = 0,
                                    double trunc_radius = std::numeric_limits<double>::infinity());

DriftField constant_drift(std::vector<double> v, const StableParams& p);
DriftField zero_drift(const StableParams& p);
DriftField sum_drift(std::vector<DriftField> parts);
DriftField scale_drift(DriftField b, double c);

// b_r(t,x) = r^{alpha-1} b(r^alpha t, r x): the rescaling that leaves the
// critical Morrey norm invariant.
DriftField parabolic_rescale(DriftField b, double r);

// t -> reflect_at - t; used to turn terminal-value problems into
// initial-value ones.
DriftField time_reflect(DriftField b, double reflect_at);

// Smooth bounded test field (compact bump velocity field) used across tests
// and as the bounded-drift reference in diagnostics.
DriftField smooth_bump_drift(double amplitude, double radius, const StableParams& p);

struct CutoffSpec {
    int n = 8;          // cutoff level
    double eps_n = 0.0; // mollification radius; 0 means pure truncation
};

// b_n = mollify_eps( 1_{|t|<=n, |x|<=n, |b|<=n} b ). The mollifier is a
// compactly supported product bump evaluated on a fixed Gauss stencil whose
// weights are normalized to unit mass, so sup|b_n| <= n exactly.
DriftField cutoff_mollify(const DriftField& b, const CutoffSpec& spec, double min_resolution = 0.0);

struct TunedCutoff {
    DriftField field;
    CutoffSpec spec;
    double discrepancy = 0.0; // || b_n - 1_n b ||_{L^{10p}} on the reference grid
    double target = 0.0;      // n^{-10}
};

// Chooses eps_n so that the grid L^{10p} discrepancy between the mollified
// and purely truncated fields is at most n^{-10} on the reference grid.
TunedCutoff auto_cutoff_mollify(const DriftField& b, int n, const BoxGrid& reference, double p);

// Sampling onto an operator grid. Cells whose closure touches a declared
// singular locus are averaged by local subsampling rather than point-sampled.
VectorFieldOnGrid sample_drift(const DriftField& b, const BoxGrid& g);
// |b|^{expo} (scalar) and b^{1/p} := b |b|^{-1+1/p} (vector), sampled likewise.
FieldOnGrid sample_abs_power(const DriftField& b, const BoxGrid& g, double expo);
VectorFieldOnGrid sample_signed_power(const DriftField& b, const BoxGrid& g, double inv_p);

// Rasterized copy of a drift onto a regular space-time lattice with
// multilinear interpolation; used by the SDE stepper where per-step lazy
// mollification would dominate the runtime.
struct RasterDomain {
    double t_lo = 0.0, t_hi = 1.0;
    double x_half = 8.0;
    std::size_t nt = 64, nx = 128;
};
DriftField rasterize_drift(const DriftField& b, const RasterDomain& dom);

// Config-file descriptor -> DriftField. Layout of the CSV for custom-grid
// drifts: header-free rows "t,x1..xd,b1..bd" on a regular lattice.
struct DriftDescriptor {
    std::string type = "radial"; // radial | time | hypersurface | sum | constant | bump | custom-grid | zero
    double kappa = 0.0;
    double s = 0.0;
    double t0 = 0.0;
    double trunc_radius = std::numeric_limits<double>::infinity();
    int direction_axis = 0;
    std::string direction = "attracting";
    std::string csv_path;
    std::string interpolation = "linear"; // or "nearest"
    std::vector<double> constant;
    double amplitude = 0.0, radius = 1.0;
    std::vector<DriftDescriptor> parts;
};

DriftField make_drift(const DriftDescriptor& desc, const StableParams& p);
DriftField load_csv_drift(const std::string& path, const StableParams& p,
                          const std::string& interpolation = "linear");

} // namespace drift
} // namespace fraclab

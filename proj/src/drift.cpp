#include "fraclab/drift.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "fraclab/numerics.hpp"
#include "fraclab/parallel.hpp"

namespace fraclab {
namespace drift {

namespace {

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

void zero_out(std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); }

} // namespace

double DriftField::magnitude(double t, std::span<const double> x) const {
    std::array<double, 3> buf{};
    std::span<double> out(buf.data(), d);
    eval(t, x, out);
    return norm2(std::span<const double>(buf.data(), d));
}

void DriftField::singular_at(double t, std::span<const double> x, std::span<double> out) const {
    if (singular_eval) {
        singular_eval(t, x, out);
    } else if (bounded_eval) {
        // split declared through the bounded part
        std::array<double, 3> buf{};
        eval(t, x, out);
        bounded_eval(t, x, std::span<double>(buf.data(), d));
        for (int i = 0; i < d; ++i) out[i] -= buf[i];
    } else {
        eval(t, x, out);
    }
}

void DriftField::bounded_at(double t, std::span<const double> x, std::span<double> out) const {
    if (bounded_eval)
        bounded_eval(t, x, out);
    else
        zero_out(out);
}

DriftField model_drift_radial(double kappa, RadialDirection dir, const StableParams& p) {
    if (kappa < 0.0) throw ConfigError("model_drift_radial: kappa must be >= 0");
    DriftField b;
    b.d = p.d;
    b.alpha = p.alpha;
    const double sign = (dir == RadialDirection::attracting) ? 1.0 : -1.0;
    const double alpha = p.alpha;
    const int d = p.d;
    b.eval = [kappa, sign, alpha, d](double, std::span<const double> x, std::span<double> out) {
        const double r = norm2(x);
        if (r <= 0.0 || kappa == 0.0) {
            zero_out(out);
            return;
        }
        const double f = sign * kappa * std::pow(r, -alpha);
        for (int i = 0; i < d; ++i) out[i] = f * x[i];
    };
    b.time_independent = true;
    b.radial_magnitude = true;
    b.point_loci.push_back(PointLocus{});
    b.id = (dir == RadialDirection::attracting ? "radial-attracting" : "radial-repulsing");
    return b;
}

DriftField model_drift_time(double kappa, double t0, const StableParams& p, int direction_axis) {
    if (kappa < 0.0) throw ConfigError("model_drift_time: kappa must be >= 0");
    if (direction_axis < 0 || direction_axis >= p.d) throw ConfigError("model_drift_time: bad axis");
    DriftField b;
    b.d = p.d;
    b.alpha = p.alpha;
    const double expo = (p.alpha - 1.0) / p.alpha;
    b.eval = [kappa, t0, expo, axis = direction_axis](double t, std::span<const double>,
                                                      std::span<double> out) {
        zero_out(out);
        if (t <= t0 || kappa == 0.0) return;
        out[axis] = kappa * std::pow(t - t0, -expo);
    };
    b.time_independent = false;
    b.space_independent = true;
    b.time_loci.push_back(TimeLocus{t0});
    b.id = "time-singular";
    return b;
}

DriftField model_drift_hypersurface(double s, const StableParams& p, int direction_axis,
                                    double trunc_radius) {
    if (!(s > 0.0 && s < p.alpha - 1.0))
        throw InvalidExponent("model_drift_hypersurface: s must lie in (0, alpha-1)");
    if (direction_axis < 0 || direction_axis >= p.d)
        throw ConfigError("model_drift_hypersurface: bad axis");
    DriftField b;
    b.d = p.d;
    b.alpha = p.alpha;
    b.eval = [s, axis = direction_axis, trunc_radius](double, std::span<const double> x,
                                                      std::span<double> out) {
        zero_out(out);
        const double u = x[axis];
        if (u == 0.0) return;
        if (norm2(x) > trunc_radius) return;
        out[axis] = std::pow(std::abs(u), -s);
    };
    b.time_independent = true;
    b.axis_magnitude = true;
    b.axis_loci.push_back(AxisLocus{direction_axis, 0.0});
    b.compact_support = std::isfinite(trunc_radius);
    b.id = "hypersurface";
    return b;
}

DriftField constant_drift(std::vector<double> v, const StableParams& p) {
    if (static_cast<int>(v.size()) != p.d) throw ConfigError("constant_drift: wrong dimension");
    DriftField b;
    b.d = p.d;
    b.alpha = p.alpha;
    double sup = norm2(std::span<const double>(v.data(), v.size()));
    b.eval = [v = std::move(v)](double, std::span<const double>, std::span<double> out) {
        std::copy(v.begin(), v.end(), out.begin());
    };
    b.bounded_eval = b.eval;
    b.singular_eval = [d = p.d](double, std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.begin() + d, 0.0);
    };
    b.bounded_sup = sup;
    b.smooth_and_bounded = true;
    b.id = "constant";
    return b;
}

DriftField zero_drift(const StableParams& p) {
    DriftField b = constant_drift(std::vector<double>(p.d, 0.0), p);
    b.id = "zero";
    return b;
}

DriftField smooth_bump_drift(double amplitude, double radius, const StableParams& p) {
    DriftField b;
    b.d = p.d;
    b.alpha = p.alpha;
    const int d = p.d;
    b.eval = [amplitude, radius, d](double, std::span<const double> x, std::span<double> out) {
        const double r2 = [&] {
            double s = 0.0;
            for (double v : x) s += v * v;
            return s;
        }();
        const double prof = amplitude * std::exp(-r2 / (radius * radius));
        if (d == 1) {
            out[0] = prof;
        } else {
            // swirl: divergence-free in the first two coordinates
            out[0] = -prof * x[1];
            out[1] = prof * x[0];
            for (int i = 2; i < d; ++i) out[i] = 0.0;
        }
    };
    b.bounded_eval = b.eval;
    b.singular_eval = [d](double, std::span<const double>, std::span<double> out) {
        std::fill(out.begin(), out.begin() + d, 0.0);
    };
    b.bounded_sup = (d == 1) ? amplitude : amplitude * radius * std::exp(-0.5) / std::sqrt(2.0);
    b.smooth_and_bounded = true;
    b.time_independent = true;
    b.compact_support = true;
    b.id = "bump";
    return b;
}

DriftField sum_drift(std::vector<DriftField> parts) {
    if (parts.empty()) throw ConfigError("sum_drift: empty sum");
    DriftField b;
    b.d = parts[0].d;
    b.alpha = parts[0].alpha;
    for (const auto& q : parts)
        if (q.d != b.d) throw ConfigError("sum_drift: dimension mismatch");
    b.time_independent = true;
    b.space_independent = false;
    b.smooth_and_bounded = true;
    for (const auto& q : parts) {
        b.time_independent = b.time_independent && q.time_independent;
        b.smooth_and_bounded = b.smooth_and_bounded && q.smooth_and_bounded;
        b.bounded_sup += q.bounded_sup;
        b.point_loci.insert(b.point_loci.end(), q.point_loci.begin(), q.point_loci.end());
        b.axis_loci.insert(b.axis_loci.end(), q.axis_loci.begin(), q.axis_loci.end());
        b.time_loci.insert(b.time_loci.end(), q.time_loci.begin(), q.time_loci.end());
    }
    auto shared = std::make_shared<std::vector<DriftField>>(std::move(parts));
    const int d = b.d;
    b.eval = [shared, d](double t, std::span<const double> x, std::span<double> out) {
        zero_out(out);
        std::array<double, 3> buf{};
        for (const auto& q : *shared) {
            q.eval(t, x, std::span<double>(buf.data(), d));
            for (int i = 0; i < d; ++i) out[i] += buf[i];
        }
    };
    b.singular_eval = [shared, d](double t, std::span<const double> x, std::span<double> out) {
        zero_out(out);
        std::array<double, 3> buf{};
        for (const auto& q : *shared) {
            q.singular_at(t, x, std::span<double>(buf.data(), d));
            for (int i = 0; i < d; ++i) out[i] += buf[i];
        }
    };
    b.bounded_eval = [shared, d](double t, std::span<const double> x, std::span<double> out) {
        zero_out(out);
        std::array<double, 3> buf{};
        for (const auto& q : *shared) {
            q.bounded_at(t, x, std::span<double>(buf.data(), d));
            for (int i = 0; i < d; ++i) out[i] += buf[i];
        }
    };
    b.id = "sum";
    return b;
}

DriftField scale_drift(DriftField b, double c) {
    auto wrap = [c](VecFn f) -> VecFn {
        if (!f) return nullptr;
        return [f = std::move(f), c](double t, std::span<const double> x, std::span<double> out) {
            f(t, x, out);
            for (double& v : out) v *= c;
        };
    };
    b.eval = wrap(b.eval);
    b.singular_eval = wrap(b.singular_eval);
    b.bounded_eval = wrap(b.bounded_eval);
    b.bounded_sup *= std::abs(c);
    return b;
}

DriftField parabolic_rescale(DriftField b, double r) {
    const double amp = std::pow(r, b.alpha - 1.0);
    const double ralpha = std::pow(r, b.alpha);
    const int d = b.d;
    auto wrap = [=](VecFn f) -> VecFn {
        if (!f) return nullptr;
        return [f = std::move(f), amp, ralpha, r, d](double t, std::span<const double> x,
                                                     std::span<double> out) {
            std::array<double, 3> y{};
            for (int i = 0; i < d; ++i) y[i] = r * x[i];
            f(ralpha * t, std::span<const double>(y.data(), d), out);
            for (double& v : out) v *= amp;
        };
    };
    DriftField s = b;
    s.eval = wrap(b.eval);
    s.singular_eval = wrap(b.singular_eval);
    s.bounded_eval = wrap(b.bounded_eval);
    s.bounded_sup *= amp;
    for (auto& pl : s.point_loci)
        for (auto& c : pl.x) c /= r;
    for (auto& al : s.axis_loci) al.offset /= r;
    for (auto& tl : s.time_loci) tl.t0 /= ralpha;
    s.id = b.id + "-rescaled";
    return s;
}

DriftField time_reflect(DriftField b, double reflect_at) {
    auto wrap = [reflect_at](VecFn f) -> VecFn {
        if (!f) return nullptr;
        return [f = std::move(f), reflect_at](double t, std::span<const double> x, std::span<double> out) {
            f(reflect_at - t, x, out);
        };
    };
    DriftField s = b;
    s.eval = wrap(b.eval);
    s.singular_eval = wrap(b.singular_eval);
    s.bounded_eval = wrap(b.bounded_eval);
    for (auto& tl : s.time_loci) tl.t0 = reflect_at - tl.t0;
    s.time_independent = b.time_independent;
    s.id = b.id + "-reflected";
    return s;
}

// ---------------------------------------------------------------------------
// cutoff + mollification

namespace {

struct Stencil {
    std::vector<double> nodes;   // on [-1,1]
    std::vector<double> weights; // normalized per-dim: sum w = 1
};

const Stencil& bump_stencil() {
    static const Stencil s = [] {
        Stencil st;
        const GaussLegendre& gl = GaussLegendre::order16();
        double tot = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double u = gl.nodes[i];
            const double psi = std::exp(-1.0 / (1.0 - u * u));
            st.nodes.push_back(u);
            st.weights.push_back(gl.weights[i] * psi);
            tot += gl.weights[i] * psi;
        }
        for (double& w : st.weights) w /= tot;
        return st;
    }();
    return s;
}

VecFn truncated_eval(const DriftField& b, VecFn inner, int n) {
    const int d = b.d;
    auto total = b.eval;
    return [inner = std::move(inner), total, n, d](double t, std::span<const double> x,
                                                   std::span<double> out) {
        zero_out(out);
        if (std::abs(t) > n) return;
        if (norm2(x) > n) return;
        std::array<double, 3> buf{};
        total(t, x, std::span<double>(buf.data(), d));
        if (norm2(std::span<const double>(buf.data(), d)) > n) return;
        inner(t, x, out);
    };
}

VecFn mollified_eval(VecFn trunc, double eps, int d) {
    if (eps <= 0.0) return trunc;
    const Stencil& st = bump_stencil();
    return [trunc = std::move(trunc), eps, d, &st](double t, std::span<const double> x,
                                                   std::span<double> out) {
        zero_out(out);
        std::array<double, 3> y{};
        std::array<double, 3> buf{};
        const std::size_t m = st.nodes.size();
        // tensor stencil over the d+1 coordinates
        std::vector<std::size_t> idx(d + 1, 0);
        while (true) {
            double w = st.weights[idx[0]];
            const double ts = t + eps * st.nodes[idx[0]];
            for (int a = 0; a < d; ++a) {
                w *= st.weights[idx[a + 1]];
                y[a] = x[a] + eps * st.nodes[idx[a + 1]];
            }
            trunc(ts, std::span<const double>(y.data(), d), std::span<double>(buf.data(), d));
            for (int i = 0; i < d; ++i) out[i] += w * buf[i];
            int a = d;
            for (; a >= 0; --a) {
                if (++idx[a] < m) break;
                idx[a] = 0;
            }
            if (a < 0) break;
        }
    };
}

} // namespace

DriftField cutoff_mollify(const DriftField& b, const CutoffSpec& spec, double min_resolution) {
    if (spec.n < 1) throw ConfigError("cutoff_mollify: n must be >= 1");
    if (spec.eps_n > 0.0 && spec.eps_n < min_resolution)
        throw StencilFailure("cutoff_mollify: eps_n is below the grid resolution");
    DriftField out;
    out.d = b.d;
    out.alpha = b.alpha;
    out.eval = mollified_eval(truncated_eval(b, b.eval, spec.n), spec.eps_n, b.d);
    VecFn sing = b.singular_eval ? b.singular_eval : (b.bounded_eval ? nullptr : b.eval);
    if (!sing) {
        // singular part defined by subtraction
        auto held = std::make_shared<DriftField>(b);
        sing = [held](double t, std::span<const double> x, std::span<double> o) {
            held->singular_at(t, x, o);
        };
    }
    out.singular_eval = mollified_eval(truncated_eval(b, sing, spec.n), spec.eps_n, b.d);
    const int d = b.d;
    auto total = out.eval;
    auto singe = out.singular_eval;
    out.bounded_eval = [total, singe, d](double t, std::span<const double> x, std::span<double> o) {
        std::array<double, 3> buf{};
        total(t, x, o);
        singe(t, x, std::span<double>(buf.data(), d));
        for (int i = 0; i < d; ++i) o[i] -= buf[i];
    };
    out.bounded_sup = std::min<double>(spec.n, b.bounded_sup > 0 ? b.bounded_sup : spec.n);
    out.smooth_and_bounded = true;
    out.time_independent = false; // the time window breaks exact time-invariance
    out.compact_support = true;
    out.point_loci.clear();
    out.id = b.id + "-cutoff" + std::to_string(spec.n);
    return out;
}

TunedCutoff auto_cutoff_mollify(const DriftField& b, int n, const BoxGrid& reference, double p) {
    const double target = std::pow(static_cast<double>(n), -10.0);
    const double q = 10.0 * p;
    DriftField trunc_only;
    {
        CutoffSpec s0{n, 0.0};
        trunc_only = cutoff_mollify(b, s0);
    }
    auto discrepancy = [&](const DriftField& bn) {
        // grid L^{10p} norm of |b_n - 1_n b|
        const std::size_t sp = reference.space_size();
        const double total = parallel_sum(reference.size(), [&](std::size_t idx) {
            const std::size_t it = idx / sp;
            std::size_t rem = idx % sp;
            std::array<double, 3> x{};
            for (int a = reference.d - 1; a >= 0; --a) {
                x[a] = reference.coord_at(rem % reference.Nx);
                rem /= reference.Nx;
            }
            std::array<double, 3> v1{}, v2{};
            const double t = reference.time_at(it);
            bn.eval(t, std::span<const double>(x.data(), reference.d),
                    std::span<double>(v1.data(), reference.d));
            trunc_only.eval(t, std::span<const double>(x.data(), reference.d),
                            std::span<double>(v2.data(), reference.d));
            double m2 = 0.0;
            for (int i = 0; i < reference.d; ++i) m2 += (v1[i] - v2[i]) * (v1[i] - v2[i]);
            return std::pow(m2, 0.5 * q);
        });
        return std::pow(total * reference.cell_volume(), 1.0 / q);
    };
    double eps = std::min(0.25, std::pow(static_cast<double>(n), -5.0));
    for (int attempt = 0; attempt < 24; ++attempt) {
        CutoffSpec spec{n, eps};
        DriftField bn = cutoff_mollify(b, spec);
        const double disc = discrepancy(bn);
        if (disc <= target) return TunedCutoff{std::move(bn), spec, disc, target};
        eps *= 0.25;
        if (eps < 1e-14) {
            // mollification indistinguishable from truncation at this grid
            CutoffSpec s{n, 0.0};
            return TunedCutoff{cutoff_mollify(b, s), s, 0.0, target};
        }
    }
    throw StencilFailure("auto_cutoff_mollify: could not meet the discrepancy target");
}

// ---------------------------------------------------------------------------
// grid sampling with cell averaging near singular loci

namespace {

bool near_locus(const DriftField& b, double t, std::span<const double> x, double ht, double hx) {
    for (const auto& pl : b.point_loci) {
        double m = 0.0;
        for (int i = 0; i < b.d; ++i) m = std::max(m, std::abs(x[i] - pl.x[i]));
        if (m <= 1.5 * hx) return true;
    }
    for (const auto& al : b.axis_loci)
        if (std::abs(x[al.axis] - al.offset) <= 1.5 * hx) return true;
    for (const auto& tl : b.time_loci)
        if (std::abs(t - tl.t0) <= 1.5 * ht) return true;
    return false;
}

template <typename F>
void cell_average(const DriftField& b, double t, std::span<const double> x, double ht, double hx,
                  bool avg_time, F&& accum) {
    // 5-point sub-sampling per involved axis; the zero-at-singularity
    // convention makes the sum finite, and the magnitudes are integrable.
    static const std::array<double, 5> off{-0.4, -0.2, 0.0, 0.2, 0.4};
    std::array<double, 3> y{};
    const int nt = avg_time ? 5 : 1;
    double count = 0.0;
    std::array<double, 3> acc{};
    std::array<double, 3> buf{};
    for (int kt = 0; kt < nt; ++kt) {
        const double ts = avg_time ? t + ht * off[kt] : t;
        std::array<int, 3> ix{};
        const int ns = 5;
        const int total = static_cast<int>(std::pow(ns, b.d));
        for (int flat = 0; flat < total; ++flat) {
            int rem = flat;
            for (int a = 0; a < b.d; ++a) {
                ix[a] = rem % ns;
                rem /= ns;
            }
            for (int a = 0; a < b.d; ++a) y[a] = x[a] + hx * off[ix[a]];
            b.eval(ts, std::span<const double>(y.data(), b.d), std::span<double>(buf.data(), b.d));
            for (int a = 0; a < b.d; ++a) acc[a] += buf[a];
            count += 1.0;
        }
    }
    for (int a = 0; a < b.d; ++a) buf[a] = acc[a] / count;
    accum(std::span<const double>(buf.data(), b.d));
}

template <typename PerNode>
void sample_nodes(const DriftField& b, const BoxGrid& g, PerNode&& per_node) {
    if (b.d != g.d) throw ConfigError("sample_drift: dimension mismatch");
    const std::size_t sp = g.space_size();
    const bool has_time_loci = !b.time_loci.empty();
    parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        std::array<double, 3> v{};
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t it = idx / sp;
            std::size_t rem = idx % sp;
            for (int a = g.d - 1; a >= 0; --a) {
                x[a] = g.coord_at(rem % g.Nx);
                rem /= g.Nx;
            }
            const double t = g.time_at(it);
            std::span<const double> xs(x.data(), g.d);
            if (near_locus(b, t, xs, g.dt(), g.dx())) {
                cell_average(b, t, xs, g.dt(), g.dx(), has_time_loci,
                             [&](std::span<const double> avg) { per_node(idx, avg); });
            } else {
                b.eval(t, xs, std::span<double>(v.data(), g.d));
                per_node(idx, std::span<const double>(v.data(), g.d));
            }
        }
    }, 256);
}

} // namespace

VectorFieldOnGrid sample_drift(const DriftField& b, const BoxGrid& g) {
    VectorFieldOnGrid out(g);
    std::vector<std::vector<double>*> comps;
    for (auto& c : out.comps) comps.push_back(&c.values());
    sample_nodes(b, g, [&](std::size_t idx, std::span<const double> v) {
        for (int a = 0; a < g.d; ++a) (*comps[a])[idx] = v[a];
    });
    return out;
}

FieldOnGrid sample_abs_power(const DriftField& b, const BoxGrid& g, double expo) {
    FieldOnGrid out(g);
    auto& vals = out.values();
    sample_nodes(b, g, [&](std::size_t idx, std::span<const double> v) {
        double m = norm2(v);
        vals[idx] = (m == 0.0) ? 0.0 : std::pow(m, expo);
    });
    return out;
}

VectorFieldOnGrid sample_signed_power(const DriftField& b, const BoxGrid& g, double inv_p) {
    // b^{1/p} = b |b|^{-1+1/p}; 0 where b vanishes.
    VectorFieldOnGrid out(g);
    std::vector<std::vector<double>*> comps;
    for (auto& c : out.comps) comps.push_back(&c.values());
    sample_nodes(b, g, [&](std::size_t idx, std::span<const double> v) {
        const double m = norm2(v);
        const double f = (m == 0.0) ? 0.0 : std::pow(m, -1.0 + inv_p);
        for (int a = 0; a < g.d; ++a) (*comps[a])[idx] = f * v[a];
    });
    return out;
}

// ---------------------------------------------------------------------------
// rasterization (for the SDE stepper)

DriftField rasterize_drift(const DriftField& b, const RasterDomain& dom) {
    const int d = b.d;
    const std::size_t nt = b.time_independent ? 1 : dom.nt;
    std::size_t nsp = 1;
    for (int i = 0; i < d; ++i) nsp *= dom.nx;
    auto table = std::make_shared<std::vector<double>>(nt * nsp * d, 0.0);
    const double ht = (nt > 1) ? (dom.t_hi - dom.t_lo) / static_cast<double>(nt - 1) : 1.0;
    const double hx = 2.0 * dom.x_half / static_cast<double>(dom.nx - 1);
    parallel_for(nt * nsp, [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        std::array<double, 3> v{};
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t it = idx / nsp;
            std::size_t rem = idx % nsp;
            for (int a = d - 1; a >= 0; --a) {
                x[a] = -dom.x_half + hx * static_cast<double>(rem % dom.nx);
                rem /= dom.nx;
            }
            const double t = dom.t_lo + ht * static_cast<double>(it);
            b.eval(t, std::span<const double>(x.data(), d), std::span<double>(v.data(), d));
            for (int a = 0; a < d; ++a) (*table)[idx * d + a] = v[a];
        }
    }, 64);

    DriftField out = b;
    out.eval = [table, dom, d, nt, nsp, ht, hx](double t, std::span<const double> x,
                                                std::span<double> res) {
        std::fill(res.begin(), res.begin() + d, 0.0);
        // outside the raster the mollified fields vanish by construction
        for (int a = 0; a < d; ++a)
            if (std::abs(x[a]) > dom.x_half) return;
        double tw = 0.0;
        std::size_t it0 = 0;
        if (nt > 1) {
            if (t < dom.t_lo || t > dom.t_hi) return;
            const double u = (t - dom.t_lo) / ht;
            it0 = std::min<std::size_t>(static_cast<std::size_t>(u), nt - 2);
            tw = u - static_cast<double>(it0);
        }
        std::array<std::size_t, 3> i0{};
        std::array<double, 3> w{};
        for (int a = 0; a < d; ++a) {
            const double u = (x[a] + dom.x_half) / hx;
            const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max(u, 0.0)),
                                                        dom.nx - 2);
            i0[a] = i;
            w[a] = u - static_cast<double>(i);
        }
        const int corners = 1 << d;
        for (int time_side = 0; time_side < ((nt > 1) ? 2 : 1); ++time_side) {
            const double wt = (nt > 1) ? (time_side ? tw : 1.0 - tw) : 1.0;
            const std::size_t it = it0 + time_side;
            for (int c = 0; c < corners; ++c) {
                double wc = wt;
                std::size_t flat = 0;
                for (int a = 0; a < d; ++a) {
                    const int side = (c >> a) & 1;
                    wc *= side ? w[a] : 1.0 - w[a];
                    flat = flat * dom.nx + (i0[a] + side);
                }
                const double* cell = table->data() + (it * nsp + flat) * d;
                for (int a = 0; a < d; ++a) res[a] += wc * cell[a];
            }
        }
    };
    out.singular_eval = nullptr;
    out.bounded_eval = out.eval;
    out.id = b.id + "-raster";
    return out;
}

// ---------------------------------------------------------------------------
// descriptors / CSV

DriftField load_csv_drift(const std::string& path, const StableParams& p,
                          const std::string& interpolation) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_csv_drift: cannot open " + path);
    const int d = p.d;
    std::vector<std::array<double, 7>> rows; // t, x(<=3), b(<=3)
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::array<double, 7> row{};
        int col = 0;
        std::string tok;
        while (std::getline(ss, tok, ',') && col < 1 + 2 * d) row[col++] = std::stod(tok);
        if (col != 1 + 2 * d) throw ConfigError("load_csv_drift: row with wrong column count");
        rows.push_back(row);
    }
    if (rows.empty()) throw ConfigError("load_csv_drift: empty file");

    auto axis_coords = [&](int col) {
        std::vector<double> c;
        for (const auto& r : rows) c.push_back(r[col]);
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                c.end());
        return c;
    };
    std::vector<std::vector<double>> coords;
    coords.push_back(axis_coords(0));
    for (int a = 0; a < d; ++a) coords.push_back(axis_coords(1 + a));
    std::size_t total = 1;
    for (const auto& c : coords) total *= c.size();
    if (total != rows.size())
        throw ConfigError("load_csv_drift: samples do not form a regular lattice");

    auto find_index = [](const std::vector<double>& c, double v) {
        const auto it = std::lower_bound(c.begin(), c.end(), v - 1e-12);
        return static_cast<std::size_t>(it - c.begin());
    };
    auto table = std::make_shared<std::vector<double>>(total * d, 0.0);
    for (const auto& r : rows) {
        std::size_t flat = find_index(coords[0], r[0]);
        for (int a = 0; a < d; ++a) flat = flat * coords[a + 1].size() + find_index(coords[a + 1], r[1 + a]);
        for (int a = 0; a < d; ++a) (*table)[flat * d + a] = r[1 + d + a];
    }
    const bool nearest = (interpolation == "nearest");
    auto coords_sh = std::make_shared<std::vector<std::vector<double>>>(std::move(coords));

    DriftField out;
    out.d = d;
    out.alpha = p.alpha;
    out.time_independent = (*coords_sh)[0].size() == 1;
    out.eval = [table, coords_sh, d, nearest](double t, std::span<const double> x,
                                              std::span<double> res) {
        std::fill(res.begin(), res.begin() + d, 0.0);
        const auto& cs = *coords_sh;
        std::array<double, 4> q{};
        q[0] = t;
        for (int a = 0; a < d; ++a) q[a + 1] = x[a];
        std::array<std::size_t, 4> i0{};
        std::array<double, 4> w{};
        for (int a = 0; a < d + 1; ++a) {
            const auto& c = cs[a];
            if (c.size() == 1) {
                i0[a] = 0;
                w[a] = 0.0;
                continue;
            }
            auto it = std::upper_bound(c.begin(), c.end(), q[a]);
            std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - c.begin()), 1,
                                                     c.size() - 1);
            i0[a] = hi - 1;
            const double span = c[hi] - c[hi - 1];
            w[a] = std::clamp((q[a] - c[hi - 1]) / span, 0.0, 1.0);
            if (nearest) w[a] = w[a] < 0.5 ? 0.0 : 1.0;
        }
        // multilinear over the d+1 lattice axes
        const int corners = 1 << (d + 1);
        for (int cidx = 0; cidx < corners; ++cidx) {
            double wc = 1.0;
            std::size_t flat = 0;
            bool skip = false;
            for (int a = 0; a < d + 1; ++a) {
                const int side = (cidx >> a) & 1;
                const auto& c = cs[a];
                if (side && c.size() == 1) {
                    skip = true;
                    break;
                }
                wc *= side ? w[a] : 1.0 - w[a];
                flat = flat * c.size() + (i0[a] + side);
            }
            if (skip || wc == 0.0) continue;
            for (int a = 0; a < d; ++a) res[a] += wc * (*table)[flat * d + a];
        }
    };
    out.bounded_eval = out.eval;
    out.singular_eval = [d](double, std::span<const double>, std::span<double> o) {
        std::fill(o.begin(), o.begin() + d, 0.0);
    };
    out.smooth_and_bounded = true;
    out.id = "custom-grid";
    return out;
}

DriftField make_drift(const DriftDescriptor& desc, const StableParams& p) {
    if (desc.type == "radial") {
        const auto dir = desc.direction == "repulsing" ? RadialDirection::repulsing
                                                       : RadialDirection::attracting;
        return model_drift_radial(desc.kappa, dir, p);
    }
    if (desc.type == "time") return model_drift_time(desc.kappa, desc.t0, p, desc.direction_axis);
    if (desc.type == "hypersurface")
        return model_drift_hypersurface(desc.s, p, desc.direction_axis, desc.trunc_radius);
    if (desc.type == "constant") return constant_drift(desc.constant, p);
    if (desc.type == "zero") return zero_drift(p);
    if (desc.type == "bump") return smooth_bump_drift(desc.amplitude, desc.radius, p);
    if (desc.type == "custom-grid") return load_csv_drift(desc.csv_path, p, desc.interpolation);
    if (desc.type == "sum") {
        std::vector<DriftField> parts;
        for (const auto& sub : desc.parts) parts.push_back(make_drift(sub, p));
        return sum_drift(std::move(parts));
    }
    throw ConfigError("make_drift: unknown type '" + desc.type + "'");
}

} // namespace drift
} // namespace fraclab

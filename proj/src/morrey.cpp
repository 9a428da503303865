#include "fraclab/morrey.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fraclab/kernels.hpp"
#include "fraclab/numerics.hpp"
#include "fraclab/parallel.hpp"

namespace fraclab {
namespace morrey {

double ParabolicCylinder::volume() const { return time_extent() * ball_volume(d, rho); }

ScalarField drift_power_field(const drift::DriftField& b, double expo, bool singular_part_only) {
    ScalarField f;
    f.d = b.d;
    f.time_independent = b.time_independent;
    f.space_independent = b.space_independent;
    f.radial = b.radial_magnitude && b.axis_loci.empty() && b.point_loci.size() == 1;
    f.axis = b.axis_magnitude && b.point_loci.empty() && b.axis_loci.size() == 1;
    f.point_loci = b.point_loci;
    f.axis_loci = b.axis_loci;
    f.time_loci = b.time_loci;
    auto held = std::make_shared<drift::DriftField>(b);
    f.eval = [held, expo, singular_part_only](double t, std::span<const double> x) {
        double m;
        if (singular_part_only) {
            std::array<double, 3> buf{};
            held->singular_at(t, x, std::span<double>(buf.data(), held->d));
            double s = 0.0;
            for (int i = 0; i < held->d; ++i) s += buf[i] * buf[i];
            m = std::sqrt(s);
        } else {
            m = held->magnitude(t, x);
        }
        return m == 0.0 ? 0.0 : std::pow(m, expo);
    };
    return f;
}

ScalarField constant_field(int d, double value) {
    ScalarField f;
    f.d = d;
    f.time_independent = true;
    f.space_independent = true;
    f.eval = [value](double, std::span<const double>) { return value; };
    return f;
}

// ---------------------------------------------------------------------------
// ball integrals

namespace {

using Section = std::function<double(std::span<const double>)>; // spatial section at fixed t

double dist_nd(std::span<const double> a, std::span<const double> b, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// radial field about `locus`: reduce to 1D with the exact clipped-sphere area
double ball_radial(const Section& g, int d, std::span<const double> center, double rho,
                   std::span<const double> locus, double rel_tol) {
    const double dist = dist_nd(center, locus, d);
    const double r_hi = dist + rho;
    std::array<double, 3> probe{};
    auto integrand = [&](double r) {
        std::array<double, 3> pt{};
        for (int i = 0; i < d; ++i) pt[i] = locus[i];
        pt[0] += r;
        (void)probe;
        const double area = sphere_in_ball_area(d, r, dist, rho);
        if (area == 0.0) return 0.0;
        return g(std::span<const double>(pt.data(), d)) * area;
    };
    std::vector<double> cuts{0.0};
    if (dist > 1e-14) cuts.push_back(std::abs(dist - rho));
    return singular_aware_quad(integrand, 0.0, r_hi, cuts, rel_tol);
}

// field depending on one coordinate only: slab reduction with the exact
// section volume of the ball
double ball_axis(const Section& g, int d, std::span<const double> center, double rho, int axis,
                 double offset, double rel_tol) {
    const double ca = center[axis];
    auto integrand = [&](double s) {
        const double u2 = rho * rho - (s - ca) * (s - ca);
        if (u2 <= 0.0) return 0.0;
        std::array<double, 3> pt{};
        for (int i = 0; i < d; ++i) pt[i] = center[i];
        pt[axis] = s;
        const double cross = (d == 1) ? 1.0 : ball_volume(d - 1, std::sqrt(u2));
        return g(std::span<const double>(pt.data(), d)) * cross;
    };
    return singular_aware_quad(integrand, ca - rho, ca + rho, {offset, ca - rho, ca + rho}, rel_tol);
}

// graded fixed-cost rule on [lo,hi] with integrable-kink cut points: GL
// panels shrink geometrically toward each cut from both sides, with optional
// non-integrability detection. Used on the generic integration paths where a
// nested rule supplies the integrand (its noise floor would send an adaptive
// rule to full depth).
double graded_cut_quad(const std::function<double(double)>& f, double lo, double hi,
                       std::vector<double> cuts, double rel_tol, bool endpoints_are_cuts = false,
                       bool detect_divergence = false) {
    static const GaussLegendre gl8(8);
    if (hi <= lo) return 0.0;
    std::vector<double> edges{lo, hi};
    for (double c : cuts)
        if (c > lo + 1e-14 * std::max(1.0, std::abs(lo)) &&
            c < hi - 1e-14 * std::max(1.0, std::abs(hi)))
            edges.push_back(c);
    std::sort(edges.begin(), edges.end());
    auto is_cut = [&](double x) {
        if (endpoints_are_cuts && (x == lo || x == hi)) return true;
        for (double c : cuts)
            if (std::abs(x - c) <= 1e-13 * std::max(1.0, std::abs(x))) return true;
        return false;
    };
    KahanSum acc;
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        const double a = edges[seg], b = edges[seg + 1];
        const bool cut_a = is_cut(a) || seg > 0;
        const bool cut_b = is_cut(b) || seg + 2 < edges.size();
        auto graded = [&](double from, double to, bool toward_from) {
            const double base = toward_from ? from : to;
            const double dir = toward_from ? 1.0 : -1.0;
            double hi_off = std::abs(to - from);
            double prev = -1.0;
            int growth = 0;
            for (int k = 0; k < 48; ++k) {
                const double lo_off = hi_off * 0.5;
                const double piece = gl_integrate(f, std::min(base + dir * lo_off, base + dir * hi_off),
                                                  std::max(base + dir * lo_off, base + dir * hi_off), gl8);
                acc.add(piece);
                if (detect_divergence) {
                    if (prev >= 0.0 && std::abs(piece) > std::abs(prev) * 1.0001 &&
                        std::abs(piece) > 1e-12 * std::abs(acc.value()))
                        ++growth;
                    else
                        growth = 0;
                    if (growth >= 30)
                        throw QuadratureFailure("graded_cut_quad: non-integrable local power");
                    prev = std::abs(piece);
                }
                if (std::abs(piece) <= rel_tol * std::abs(acc.value()) && k > 5) break;
                hi_off = lo_off;
            }
        };
        if (!cut_a && !cut_b) {
            const int nseg = 6;
            for (int k = 0; k < nseg; ++k)
                acc.add(gl_integrate(f, a + (b - a) * k / nseg, a + (b - a) * (k + 1) / nseg, gl8));
        } else if (cut_a && cut_b) {
            const double mid = 0.5 * (a + b);
            graded(a, mid, true);
            graded(mid, b, false);
        } else if (cut_a) {
            graded(a, b, true);
        } else {
            graded(a, b, false);
        }
    }
    return acc.value();
}

// generic planar section integral (d == 2) in polar coordinates around
// `pole`, which is either the ball center or an interior point singularity
double ball_polar2(const Section& g, std::span<const double> center, double rho,
                   std::span<const double> pole, const std::vector<drift::AxisLocus>& axis_loci,
                   const std::vector<drift::PointLocus>& point_loci, bool pole_is_locus,
                   double rel_tol) {
    const double dist = dist_nd(center, pole, 2);
    const double r_hi = dist + rho;
    const double phi0 = (dist > 1e-14) ? std::atan2(center[1] - pole[1], center[0] - pole[0]) : 0.0;

    auto angular = [&](double r) {
        double half = M_PI;
        if (r > rho - dist) {
            const double c = (r * r + dist * dist - rho * rho) / (2.0 * r * std::max(dist, 1e-300));
            half = std::acos(std::clamp(c, -1.0, 1.0));
        }
        if (half <= 0.0) return 0.0;
        const double lo = phi0 - half, hi = phi0 + half;
        // cut angles where the circle of radius r crosses a singular axis plane
        std::vector<double> cuts;
        for (const auto& al : axis_loci) {
            const double u = (al.offset - pole[al.axis]) / r;
            if (std::abs(u) <= 1.0) {
                double base = (al.axis == 0) ? std::acos(u) : std::asin(u);
                for (double cand : {base, (al.axis == 0) ? -base : M_PI - base}) {
                    for (int k = -1; k <= 1; ++k) {
                        const double phi = cand + 2.0 * M_PI * k;
                        if (phi > lo && phi < hi) cuts.push_back(phi);
                    }
                }
            }
        }
        auto f_ang = [&](double phi) {
            const double pt[2] = {pole[0] + r * std::cos(phi), pole[1] + r * std::sin(phi)};
            return g(std::span<const double>(pt, 2));
        };
        return graded_cut_quad(f_ang, lo, hi, cuts, rel_tol) * r;
    };

    std::vector<double> cuts{0.0, std::abs(dist - rho)};
    for (const auto& al : axis_loci) cuts.push_back(std::abs(al.offset - pole[al.axis]));
    for (const auto& pl : point_loci) {
        const double dl = dist_nd(std::span<const double>(pl.x.data(), 2), pole, 2);
        if (dl > 1e-14 && dl < r_hi) cuts.push_back(dl);
    }
    return graded_cut_quad(angular, 0.0, r_hi, cuts, rel_tol, /*endpoints_are_cuts=*/pole_is_locus,
                           /*detect_divergence=*/true);
}

double ball_smooth(const Section& g, int d, std::span<const double> center, double rho,
                   double rel_tol) {
    if (d == 1) {
        auto f = [&](double s) { return g(std::span<const double>(&s, 1)); };
        return adaptive_quad(f, center[0] - rho, center[0] + rho, rel_tol);
    }
    if (d == 2) {
        return ball_polar2(g, center, rho, center, {}, {}, false, rel_tol);
    }
    // d == 3: product rule, adequate for smooth sections
    const GaussLegendre& gl = GaussLegendre::order16();
    auto shell = [&](double r) {
        KahanSum s;
        const int nphi = 24;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double cth = gl.nodes[i];
            const double sth = std::sqrt(std::max(0.0, 1.0 - cth * cth));
            for (int j = 0; j < nphi; ++j) {
                const double phi = 2.0 * M_PI * (j + 0.5) / nphi;
                const double pt[3] = {center[0] + r * sth * std::cos(phi),
                                      center[1] + r * sth * std::sin(phi), center[2] + r * cth};
                s.add(gl.weights[i] * g(std::span<const double>(pt, 3)) / nphi);
            }
        }
        return s.value() * 2.0 * M_PI * r * r;
    };
    return adaptive_quad(shell, 0.0, rho, rel_tol);
}

double ball_integral(const ScalarField& f, double q, double t, std::span<const double> center,
                     double rho, double rel_tol) {
    Section g = [&](std::span<const double> x) {
        const double v = f.eval(t, x);
        return v == 0.0 ? 0.0 : std::pow(std::abs(v), q);
    };
    if (f.space_independent) {
        std::array<double, 3> pt{};
        for (int i = 0; i < f.d; ++i) pt[i] = center[i];
        return g(std::span<const double>(pt.data(), f.d)) * ball_volume(f.d, rho);
    }
    if (f.radial && f.point_loci.size() == 1)
        return ball_radial(g, f.d, center, rho,
                           std::span<const double>(f.point_loci[0].x.data(), f.d), rel_tol);
    if (f.axis && f.axis_loci.size() == 1 && f.d >= 1) {
        if (f.d == 1) {
            auto h = [&](double s) { return g(std::span<const double>(&s, 1)); };
            return singular_aware_quad(h, center[0] - rho, center[0] + rho,
                                       {f.axis_loci[0].offset}, rel_tol);
        }
        return ball_axis(g, f.d, center, rho, f.axis_loci[0].axis, f.axis_loci[0].offset, rel_tol);
    }
    if (f.point_loci.empty() && f.axis_loci.empty())
        return ball_smooth(g, f.d, center, rho, rel_tol);
    // mixed singular structure
    if (f.d == 1) {
        std::vector<double> cuts;
        for (const auto& pl : f.point_loci) cuts.push_back(pl.x[0]);
        for (const auto& al : f.axis_loci) cuts.push_back(al.offset);
        auto h = [&](double s) { return g(std::span<const double>(&s, 1)); };
        return singular_aware_quad(h, center[0] - rho, center[0] + rho, cuts, rel_tol);
    }
    if (f.d == 2) {
        // pole at the unique interior point locus if there is one
        std::span<const double> pole = center;
        bool pole_is_locus = false;
        for (const auto& pl : f.point_loci) {
            if (dist_nd(std::span<const double>(pl.x.data(), 2), center, 2) < rho) {
                pole = std::span<const double>(pl.x.data(), 2);
                pole_is_locus = true;
                break;
            }
        }
        return ball_polar2(g, center, rho, pole, f.axis_loci, f.point_loci, pole_is_locus, rel_tol);
    }
    throw QuadratureFailure("ball_integral: mixed singular structure is only supported in d<=2");
}

} // namespace

double cylinder_integral_pow(const ScalarField& f, double q, const ParabolicCylinder& cyl,
                             double rel_tol) {
    const double ext = cyl.time_extent();
    const std::span<const double> cx(cyl.x.data(), f.d);
    if (f.time_independent)
        return ext * ball_integral(f, q, cyl.t, cx, cyl.rho, rel_tol);
    if (f.space_independent) {
        auto h = [&](double t) {
            const double v = f.eval(t, cx);
            return v == 0.0 ? 0.0 : std::pow(std::abs(v), q);
        };
        std::vector<double> cuts;
        for (const auto& tl : f.time_loci) cuts.push_back(tl.t0);
        return ball_volume(f.d, cyl.rho) *
               singular_aware_quad(h, cyl.t, cyl.t + ext, cuts, rel_tol);
    }
    auto slice = [&](double t) { return ball_integral(f, q, t, cx, cyl.rho, rel_tol * 2.0); };
    std::vector<double> cuts;
    for (const auto& tl : f.time_loci) cuts.push_back(tl.t0);
    return graded_cut_quad(slice, cyl.t, cyl.t + ext, cuts, rel_tol);
}

// ---------------------------------------------------------------------------
// sampling plans and norms

SamplingPlan SamplingPlan::standard(const ScalarField& f, int d, int lo, int hi) {
    SamplingPlan p;
    for (int k = lo; k <= hi; ++k) p.radii.push_back(std::pow(2.0, k));
    p.centers_t.push_back(0.0);
    for (const auto& tl : f.time_loci) p.centers_t.push_back(tl.t0);
    std::array<double, 3> origin{0.0, 0.0, 0.0};
    p.centers_x.push_back(origin);
    for (double off : {0.5, 2.0}) {
        std::array<double, 3> c = origin;
        c[0] = off;
        p.centers_x.push_back(c);
    }
    for (const auto& pl : f.point_loci) p.centers_x.push_back(pl.x);
    for (const auto& al : f.axis_loci) {
        std::array<double, 3> c = origin;
        c[al.axis] = al.offset;
        p.centers_x.push_back(c);
        c[(al.axis + 1) % d] = 1.0;
        p.centers_x.push_back(c);
    }
    return p;
}

SamplingPlan SamplingPlan::refined() const {
    SamplingPlan p = *this;
    std::vector<double> radii;
    for (std::size_t i = 0; i + 1 < this->radii.size(); ++i) {
        radii.push_back(this->radii[i]);
        radii.push_back(std::sqrt(this->radii[i] * this->radii[i + 1]));
    }
    radii.push_back(this->radii.back());
    p.radii = radii;
    for (double off : {0.25, 1.0, 4.0}) {
        std::array<double, 3> c{off, off, 0.0};
        p.centers_x.push_back(c);
    }
    return p;
}

namespace {

MorreyReport norm_impl(const ScalarField& v, double q, const SamplingPlan& plan, double alpha,
                       bool elliptic, double rel_tol) {
    MorreyReport rep;
    rep.q = q;
    rep.rho_grid = plan.radii;
    rep.center_count = plan.centers_x.size() * (elliptic ? 1 : plan.centers_t.size());
    double best = 0.0;
    ParabolicCylinder arg;
    for (double rho : plan.radii) {
        for (const auto& cx : plan.centers_x) {
            for (double ct : (elliptic ? std::vector<double>{0.0} : plan.centers_t)) {
                ParabolicCylinder cyl;
                cyl.t = ct;
                cyl.x = cx;
                cyl.rho = rho;
                cyl.alpha = alpha;
                cyl.d = v.d;
                const double integral = cylinder_integral_pow(v, q, cyl, rel_tol);
                const double avg = integral / cyl.volume();
                const double val = rho * std::pow(std::max(avg, 0.0), 1.0 / q);
                if (val > best) {
                    best = val;
                    arg = cyl;
                }
            }
        }
    }
    rep.norm_estimate = best;
    rep.arg_cylinder = arg;
    return rep;
}

} // namespace

MorreyReport parabolic_morrey_norm(const ScalarField& v, double q, const SamplingPlan& plan,
                                   double alpha, double rel_tol) {
    return norm_impl(v, q, plan, alpha, false, rel_tol);
}

MorreyReport elliptic_morrey_norm(const ScalarField& v, double q, const SamplingPlan& plan,
                                  double alpha, double rel_tol) {
    if (!v.time_independent)
        throw ConfigError("elliptic_morrey_norm: field must be time-independent");
    return norm_impl(v, q, plan, alpha, true, rel_tol);
}

MorreyReport parabolic_morrey_norm_grid(const FieldOnGrid& v, double q, const SamplingPlan& plan,
                                        double alpha) {
    const BoxGrid& g = v.grid();
    const auto& vals = v.values();
    const std::size_t sp = g.space_size();
    MorreyReport rep;
    rep.q = q;
    rep.rho_grid = plan.radii;
    rep.center_count = plan.centers_x.size() * plan.centers_t.size();
    double best = 0.0;
    ParabolicCylinder arg;
    for (double rho : plan.radii) {
        const double ext = std::pow(rho, alpha);
        if (ext > g.Lt || 2.0 * rho > g.Lx) continue; // cylinder must fit the box
        for (const auto& cx : plan.centers_x) {
            for (double ct : plan.centers_t) {
                KahanSum acc;
                std::size_t count = 0;
                for (std::size_t idx = 0; idx < vals.size(); ++idx) {
                    const std::size_t it = idx / sp;
                    double tdiff = g.time_at(it) - ct;
                    tdiff -= g.Lt * std::floor(tdiff / g.Lt); // periodic wrap
                    if (tdiff > ext) continue;
                    std::size_t rem = idx % sp;
                    double r2 = 0.0;
                    for (int a = g.d - 1; a >= 0; --a) {
                        double dx = g.coord_at(rem % g.Nx) - cx[a];
                        dx -= g.Lx * std::round(dx / g.Lx);
                        r2 += dx * dx;
                        rem /= g.Nx;
                    }
                    if (r2 > rho * rho) continue;
                    acc.add(std::pow(std::abs(vals[idx]), q));
                    ++count;
                }
                if (count == 0) continue;
                const double avg = acc.value() / static_cast<double>(count);
                const double val = rho * std::pow(avg, 1.0 / q);
                if (val > best) {
                    best = val;
                    arg = ParabolicCylinder{ct, cx, rho, alpha, g.d};
                }
            }
        }
    }
    rep.norm_estimate = best;
    rep.arg_cylinder = arg;
    return rep;
}

// ---------------------------------------------------------------------------
// maximal functions

MaximalValues maximal_functions(const ScalarField& f, double beta, double t,
                                std::span<const double> x, std::span<const double> rho_grid,
                                double alpha, double rel_tol) {
    MaximalValues out;
    for (double rho : rho_grid) {
        ParabolicCylinder cyl;
        cyl.alpha = alpha;
        cyl.d = f.d;
        cyl.rho = rho;
        cyl.t = t;
        for (int i = 0; i < f.d; ++i) cyl.x[i] = x[i];
        const double avg = cylinder_integral_pow(f, 1.0, cyl, rel_tol) / cyl.volume();
        out.M_beta = std::max(out.M_beta, std::pow(rho, beta) * avg);
        out.M = std::max(out.M, avg);
        // cylinders containing (t,x): a small family of shifted starts/centers
        const double ext = cyl.time_extent();
        for (double tf : {0.5, 0.999}) {
            for (int axis = -1; axis < f.d; ++axis) {
                ParabolicCylinder c2 = cyl;
                c2.t = t - tf * ext;
                if (axis >= 0) c2.x[axis] -= 0.5 * rho;
                const double a2 = cylinder_integral_pow(f, 1.0, c2, rel_tol) / c2.volume();
                out.M_hat = std::max(out.M_hat, a2);
            }
        }
    }
    out.M_hat = std::max(out.M_hat, out.M);
    return out;
}

// ---------------------------------------------------------------------------
// pointwise kernel application P_gamma

namespace {

// fixed-rule geometric panels toward 0, GL8 per panel: the pointwise kernel
// application has three nested integrals, so the inner rules must have a
// hard cost bound
double panel_quad(const std::function<double(double)>& f, double lo, double hi,
                  const std::vector<double>& cuts, double rel_tol) {
    static const GaussLegendre gl8(8);
    if (hi <= lo) return 0.0;
    std::vector<double> edges{lo, hi};
    for (double c : cuts)
        if (c > lo && c < hi) edges.push_back(c);
    std::sort(edges.begin(), edges.end());
    KahanSum acc;
    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        double a = edges[seg], b = edges[seg + 1];
        if (a <= 0.0 && b > 0.0) {
            double hi_off = b;
            for (int k = 0; k < 60; ++k) {
                const double lo_off = hi_off * 0.5;
                const double piece = gl_integrate(f, lo_off, hi_off, gl8);
                acc.add(piece);
                if (std::abs(piece) <= rel_tol * std::abs(acc.value()) && k > 6) break;
                hi_off = lo_off;
            }
        } else {
            const int nseg = 8;
            for (int k = 0; k < nseg; ++k)
                acc.add(gl_integrate(f, a + (b - a) * k / nseg, a + (b - a) * (k + 1) / nseg, gl8));
        }
    }
    return acc.value();
}

} // namespace

double apply_p_gamma(const ScalarField& f, double gamma, double t, std::span<const double> x,
                     const StableParams& params, bool adjoint, std::optional<double> restrict_rho,
                     bool restrict_outside, double rel_tol, double s_max, double y_max) {
    const int d = params.d;
    const double alpha = params.alpha;
    const double tsign = adjoint ? -1.0 : 1.0;

    auto sample = [&](double s, std::span<const double> y) {
        // region restriction in the relative coordinates (s, y)
        if (restrict_rho) {
            const double rho = *restrict_rho;
            const bool inside = (s >= 0.0 && s <= std::pow(rho, alpha)) && [&] {
                double r2 = 0.0;
                for (int i = 0; i < d; ++i) r2 += y[i] * y[i];
                return r2 <= rho * rho;
            }();
            if (restrict_outside == inside) return 0.0;
        }
        std::array<double, 3> pt{};
        for (int i = 0; i < d; ++i) pt[i] = x[i] + y[i];
        return std::abs(f.eval(t + tsign * s, std::span<const double>(pt.data(), d)));
    };

    auto angular_avg = [&](double u, const std::function<double(std::span<const double>)>& fn) {
        // surface integral over the sphere |y| = u (not normalized)
        KahanSum ang;
        if (d == 1) {
            const double om1[1] = {u}, om2[1] = {-u};
            ang.add(fn(std::span<const double>(om1, 1)));
            ang.add(fn(std::span<const double>(om2, 1)));
            return ang.value();
        }
        if (d == 2) {
            const int nphi = 24;
            for (int j = 0; j < nphi; ++j) {
                const double phi = 2.0 * M_PI * (j + 0.5) / nphi;
                const double om[2] = {u * std::cos(phi), u * std::sin(phi)};
                ang.add(fn(std::span<const double>(om, 2)) * (2.0 * M_PI * u / nphi));
            }
            return ang.value();
        }
        static const GaussLegendre gl12(12);
        const int nphi = 12;
        for (std::size_t i = 0; i < gl12.nodes.size(); ++i) {
            const double cth = gl12.nodes[i];
            const double sth = std::sqrt(std::max(0.0, 1.0 - cth * cth));
            for (int j = 0; j < nphi; ++j) {
                const double phi = 2.0 * M_PI * (j + 0.5) / nphi;
                const double om[3] = {u * sth * std::cos(phi), u * sth * std::sin(phi), u * cth};
                ang.add(fn(std::span<const double>(om, 3)) * gl12.weights[i] *
                        (2.0 * M_PI * u * u / nphi));
            }
        }
        return ang.value();
    };

    std::vector<double> scuts, ucuts;
    if (restrict_rho) {
        scuts.push_back(std::pow(*restrict_rho, alpha));
        ucuts.push_back(*restrict_rho);
    }

    // near region |y| < s^{1/alpha}: shell integral in y at each time offset
    auto near_w = [&](double s) {
        const double rad = std::min(std::pow(s, 1.0 / alpha), y_max);
        auto shell = [&](double u) {
            return angular_avg(u, [&](std::span<const double> y) { return sample(s, y); });
        };
        const double w = panel_quad(shell, 0.0, rad, ucuts, rel_tol);
        return std::pow(s, 0.5 * gamma - (d + alpha) / alpha) * w;
    };
    const double near = panel_quad(near_w, 0.0, s_max, scuts, rel_tol);

    // far region |y| >= s^{1/alpha}: time integral innermost
    auto far_shell = [&](double u) {
        const double s_hi = std::min(s_max, std::pow(u, alpha));
        if (s_hi <= 0.0) return 0.0;
        const double ang = angular_avg(u, [&](std::span<const double> y) {
            auto ft = [&](double s) { return std::pow(s, 0.5 * gamma) * sample(s, y); };
            return panel_quad(ft, 0.0, s_hi, scuts, std::max(rel_tol, 3e-4));
        });
        return std::pow(u, -(d + alpha)) * ang;
    };
    const double far = panel_quad(far_shell, 0.0, y_max, ucuts, rel_tol);

    return near + far;
}

LemmaCheck lemma_pointwise_check(const ScalarField& f, double gamma, double beta, double rho,
                                 double t, std::span<const double> x, const StableParams& params,
                                 double rel_tol) {
    const double alpha = params.alpha;
    const double ag2 = 0.5 * alpha * gamma;
    if (!(beta > ag2 && beta <= params.d + gamma))
        throw InvalidExponent("lemma_pointwise_check: beta must lie in (alpha*gamma/2, d+gamma]");
    LemmaCheck out;
    out.lhs_out = apply_p_gamma(f, gamma, t, x, params, false, rho, /*outside=*/true, rel_tol);
    out.lhs_in = apply_p_gamma(f, gamma, t, x, params, false, rho, /*outside=*/false, rel_tol);

    std::vector<double> rho_grid;
    for (int k = -4; k <= 4; ++k) rho_grid.push_back(rho * std::pow(2.0, 0.5 * k));
    MaximalValues mv = maximal_functions(f, beta, t, x, rho_grid, alpha, rel_tol);

    out.rhs_out = std::pow(rho, ag2 - beta) * mv.M_beta;
    out.rhs_in = std::pow(rho, ag2) * mv.M;
    out.K_measured = (out.rhs_out > 0.0) ? out.lhs_out / out.rhs_out : 0.0;
    out.N_measured = (out.rhs_in > 0.0) ? out.lhs_in / out.rhs_in : 0.0;
    out.K_printed = (1.0 / (ag2 - beta)) * (-ag2 + params.d + alpha); // negative when beta > ag2
    out.N_printed = (2.0 / (alpha * gamma)) * (-ag2 + params.d + alpha);

    const double a = ag2 / beta;
    out.interp_lhs = out.lhs_out + out.lhs_in;
    out.interp_rhs = std::pow(mv.M_beta, a) * std::pow(mv.M, 1.0 - a);
    out.C_measured = (out.interp_rhs > 0.0) ? out.interp_lhs / out.interp_rhs : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Adams-Krylov empirical constant via padded FFT correlation

namespace {

// cell-averaged kernel table on the padded lattice
std::vector<cplx> kernel_table(const BoxGrid& g, double gamma, const StableParams& params) {
    const std::size_t PNt = 2 * g.Nt, PNx = 2 * g.Nx;
    std::size_t total = PNt;
    for (int i = 0; i < g.d; ++i) total *= PNx;
    std::vector<cplx> tab(total, cplx(0.0, 0.0));
    const double ht = g.dt(), hx = g.dx();
    std::size_t psp = 1;
    for (int i = 0; i < g.d; ++i) psp *= PNx;

    static const GaussLegendre sub(4); // per-axis nodes for near-cell averaging
    parallel_for(total, [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> y{};
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t it = idx / psp;
            std::size_t rem = idx % psp;
            if (it >= g.Nt) continue; // kernel lives on s >= 0 only
            const double s = static_cast<double>(it) * ht;
            double ymax = 0.0;
            for (int a = g.d - 1; a >= 0; --a) {
                const std::size_t k = rem % PNx;
                rem /= PNx;
                const double off =
                    (k < g.Nx) ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(PNx);
                y[a] = off * hx;
                ymax = std::max(ymax, std::abs(y[a]));
            }
            double norm_y = 0.0;
            for (int a = 0; a < g.d; ++a) norm_y += y[a] * y[a];
            norm_y = std::sqrt(norm_y);
            const bool near = (s <= 3.0 * ht) || (ymax <= 3.0 * hx);
            double val;
            if (!near) {
                val = kernels::comparison_kernel(s, norm_y, gamma, params);
            } else {
                // average p_gamma over the space-time cell
                KahanSum acc;
                double wsum = 0.0;
                for (std::size_t q1 = 0; q1 < sub.nodes.size(); ++q1) {
                    const double st = s + 0.5 * ht * sub.nodes[q1];
                    const double wt = sub.weights[q1];
                    wsum += wt;
                    if (st <= 0.0) continue; // causal part of the cell contributes zero
                    double inner = 0.0, win = 0.0;
                    std::array<std::size_t, 3> ix{};
                    std::size_t spatial = 1;
                    for (int a = 0; a < g.d; ++a) spatial *= sub.nodes.size();
                    for (std::size_t flat = 0; flat < spatial; ++flat) {
                        std::size_t r2 = flat;
                        double w = 1.0, ry = 0.0;
                        for (int a = 0; a < g.d; ++a) {
                            ix[a] = r2 % sub.nodes.size();
                            r2 /= sub.nodes.size();
                            const double yy = y[a] + 0.5 * hx * sub.nodes[ix[a]];
                            w *= sub.weights[ix[a]];
                            ry += yy * yy;
                        }
                        inner += w * kernels::comparison_kernel(st, std::sqrt(ry), gamma, params);
                        win += w;
                    }
                    acc.add(wt * inner / win);
                }
                val = acc.value() / wsum;
            }
            tab[idx] = cplx(val, 0.0);
        }
    }, 1024);
    return tab;
}

// time reflection k(-s, y), stored cyclically on the padded lattice
std::vector<cplx> reflect_time(const std::vector<cplx>& tab, std::size_t PNt, std::size_t psp) {
    std::vector<cplx> ref(tab.size(), cplx(0.0, 0.0));
    for (std::size_t it = 0; it < PNt; ++it) {
        const std::size_t jt = (PNt - it) % PNt;
        for (std::size_t isp = 0; isp < psp; ++isp) ref[jt * psp + isp] = tab[it * psp + isp];
    }
    return ref;
}

} // namespace

AdamsKrylovResult adams_krylov_check(const drift::DriftField& b, const FieldOnGrid& f, double p,
                                     const StableParams& params, const MorreyReport& morrey_of_b) {
    const BoxGrid& g = f.grid();
    AdamsKrylovResult out;
    out.f_norm = f.lp_norm(p);
    out.morrey_norm = morrey_of_b.norm_estimate;
    FieldOnGrid absb = drift::sample_abs_power(b, g, 1.0);
    const double bsum = absb.integral();
    if (bsum == 0.0 || out.f_norm == 0.0) {
        out.vacuous = true;
        return out;
    }

    const double gamma = (1.0 - 1.0 / params.alpha) * 2.0 / p;
    const std::size_t PNt = 2 * g.Nt, PNx = 2 * g.Nx;
    std::vector<std::size_t> pdims{PNt};
    for (int i = 0; i < g.d; ++i) pdims.push_back(PNx);
    std::size_t ptotal = PNt;
    for (int i = 0; i < g.d; ++i) ptotal *= PNx;
    std::size_t psp = ptotal / PNt;
    const std::size_t sp = g.space_size();

    // padded copy of f
    std::vector<cplx> fpad(ptotal, cplx(0.0, 0.0));
    const auto& fv = f.values();
    for (std::size_t it = 0; it < g.Nt; ++it)
        for (std::size_t isp = 0; isp < sp; ++isp) {
            // expand row-major space index into padded coordinates
            std::size_t rem = isp, pidx = 0;
            std::size_t mult = 1;
            std::size_t coords[3];
            for (int a = g.d - 1; a >= 0; --a) {
                coords[a] = rem % g.Nx;
                rem /= g.Nx;
            }
            (void)mult;
            pidx = it;
            for (int a = 0; a < g.d; ++a) pidx = pidx * PNx + coords[a];
            fpad[pidx] = cplx(fv[it * sp + isp], 0.0);
        }
    fft_nd(fpad, pdims, false);

    const std::vector<cplx> base_kernel = kernel_table(g, gamma, params);
    auto correlate = [&](bool adjoint) {
        std::vector<cplx> k = adjoint ? reflect_time(base_kernel, PNt, psp) : base_kernel;
        fft_nd(k, pdims, false);
        std::vector<cplx> prod(ptotal);
        for (std::size_t i = 0; i < ptotal; ++i) prod[i] = std::conj(k[i]) * fpad[i];
        fft_nd(prod, pdims, true);
        // <|b| (P f)^p> over the original grid
        const double cellvol = g.cell_volume();
        const auto& bw = absb.values();
        double lhs = parallel_sum(g.size(), [&](std::size_t idx) {
            const std::size_t it = idx / sp;
            std::size_t rem = idx % sp;
            std::size_t coords[3];
            for (int a = g.d - 1; a >= 0; --a) {
                coords[a] = rem % g.Nx;
                rem /= g.Nx;
            }
            std::size_t pidx = it;
            for (int a = 0; a < g.d; ++a) pidx = pidx * PNx + coords[a];
            const double pf = std::max(prod[pidx].real() * cellvol, 0.0);
            return bw[idx] * std::pow(pf, p);
        });
        return lhs * cellvol;
    };

    out.lhs = correlate(false);
    out.lhs_adjoint = correlate(true);
    const double denom =
        std::pow(out.morrey_norm, (params.alpha - 1.0) / p) * out.f_norm;
    out.constant = std::pow(out.lhs, 1.0 / p) / denom;
    out.constant_adjoint = std::pow(out.lhs_adjoint, 1.0 / p) / denom;
    return out;
}

} // namespace morrey
} // namespace fraclab

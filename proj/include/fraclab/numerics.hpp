#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fraclab/errors.hpp"

namespace fraclab {

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

// Gauss-Legendre nodes/weights on [-1,1], computed once per order by Newton
// iteration on the Legendre recurrence.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n) : nodes(n), weights(n) {
        for (int i = 0; i < n; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }

    static const GaussLegendre& order16() {
        static const GaussLegendre g(16);
        return g;
    }
    static const GaussLegendre& order32() {
        static const GaussLegendre g(32);
        return g;
    }
};

inline double gl_integrate(const std::function<double(double)>& f, double a, double b,
                           const GaussLegendre& rule = GaussLegendre::order16()) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    KahanSum acc;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc.add(rule.weights[i] * f(mid + half * rule.nodes[i]));
    return acc.value() * half;
}

// Adaptive quadrature on a smooth interval: split-and-compare GL panels.
// Local errors are measured against the whole-integral scale so near-zero
// stretches do not trigger runaway refinement on round-off noise.
inline double adaptive_quad(const std::function<double(double)>& f, double a, double b,
                            double rel_tol, double abs_floor = 0.0, int max_depth = 24) {
    struct Rec {
        static double go(const std::function<double(double)>& f, double a, double b, double whole,
                         double scale, double rel_tol, double abs_floor, int depth) {
            const double m = 0.5 * (a + b);
            const double left = gl_integrate(f, a, m);
            const double right = gl_integrate(f, m, b);
            const double err = std::abs(left + right - whole);
            const double tol = rel_tol * std::max(std::abs(left + right), scale) + abs_floor;
            if (depth <= 0 || err <= tol) return left + right;
            return go(f, a, m, left, scale, rel_tol, abs_floor, depth - 1) +
                   go(f, m, b, right, scale, rel_tol, abs_floor, depth - 1);
        }
    };
    const double whole = gl_integrate(f, a, b);
    const double scale = 1e-3 * std::abs(whole);
    return Rec::go(f, a, b, whole, scale, rel_tol, abs_floor, max_depth);
}

// Integrates f over [a,b] where f may have an integrable power singularity at
// the endpoint `sing` (= a or b). Geometric panels shrink toward the endpoint
// and the leftover mass is completed by geometric-series extrapolation (the
// panel sums of a power integrand decay with a fixed ratio). If panel
// contributions stop decaying, the local power is not integrable.
inline double graded_endpoint_quad(const std::function<double(double)>& f, double a, double b,
                                   double sing, double rel_tol) {
    if (b <= a) return 0.0;
    const bool at_left = std::abs(sing - a) < std::abs(sing - b);
    const double base = at_left ? a : b;
    KahanSum acc;
    double len = b - a;
    double hi = len; // distance from singular endpoint
    int growth_run = 0;
    double prev = -1.0, prev_ratio = -1.0, piece = 0.0, ratio = 0.0;
    auto extrapolated_tail = [&]() {
        // complete the geometric tail when the pieces settled into a stable
        // decay ratio (pure powers do exactly this)
        if (prev <= 0.0 || piece <= 0.0) return 0.0;
        if (!(ratio > 0.0 && ratio < 0.97)) return 0.0;
        if (prev_ratio > 0.0 && std::abs(ratio - prev_ratio) > 0.2 * ratio) return 0.0;
        return piece * ratio / (1.0 - ratio);
    };
    for (int k = 0; k < 2000; ++k) {
        const double lo = hi * 0.5;
        const double pa = at_left ? base + lo : base - hi;
        const double pb = at_left ? base + hi : base - lo;
        // stop well above the endpoint's float resolution: quantized panels
        // would poison the decay-ratio estimate the tail completion needs
        if (hi <= 4e-12 * std::abs(base) || hi < 1e-300) {
            acc.add(extrapolated_tail());
            return acc.value();
        }
        const double p_new = adaptive_quad(f, pa, pb, rel_tol, 0.0, 8);
        if (prev > 0.0 && p_new > 0.0) {
            prev_ratio = ratio;
            ratio = p_new / prev;
        }
        prev = piece = p_new;
        acc.add(p_new);
        if (ratio > 1.0001 && std::abs(p_new) > 1e-13 * std::abs(acc.value()))
            ++growth_run;
        else
            growth_run = 0;
        if (growth_run >= 40)
            throw QuadratureFailure("graded_endpoint_quad: panel contributions do not decay; "
                                    "local power appears non-integrable");
        if (std::abs(p_new) <= rel_tol * std::abs(acc.value()) && k > 8) {
            acc.add(extrapolated_tail());
            return acc.value();
        }
        hi = lo;
    }
    acc.add(extrapolated_tail());
    return acc.value();
}

// Integrates f over [a,b] given a sorted list of interior/endpoint singular
// abscissae. Smooth pieces use adaptive GL, singular endpoints graded panels.
inline double singular_aware_quad(const std::function<double(double)>& f, double a, double b,
                                  std::vector<double> sings, double rel_tol) {
    if (b <= a) return 0.0;
    std::sort(sings.begin(), sings.end());
    std::vector<double> cuts{a};
    for (double s : sings)
        if (s > a + 1e-300 && s < b - 1e-300) cuts.push_back(s);
    cuts.push_back(b);
    auto is_sing = [&](double x) {
        for (double s : sings)
            if (std::abs(x - s) <= 1e-14 * std::max(1.0, std::abs(x))) return true;
        return false;
    };
    KahanSum acc;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        const bool sing_lo = is_sing(lo), sing_hi = is_sing(hi);
        if (!sing_lo && !sing_hi) {
            acc.add(adaptive_quad(f, lo, hi, rel_tol));
        } else if (sing_lo && sing_hi) {
            const double mid = 0.5 * (lo + hi);
            acc.add(graded_endpoint_quad(f, lo, mid, lo, rel_tol));
            acc.add(graded_endpoint_quad(f, mid, hi, hi, rel_tol));
        } else {
            acc.add(graded_endpoint_quad(f, lo, hi, sing_lo ? lo : hi, rel_tol));
        }
    }
    return acc.value();
}

inline double sphere_surface_area(int d) {
    // |S^{d-1}| for the unit sphere in R^d.
    return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

inline double ball_volume(int d, double r) {
    return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(r, d);
}

// Surface measure of the sphere |y|=r (centered at origin) clipped to the ball
// B_rho(c) with |c| = dist. Supports d = 1,2,3.
inline double sphere_in_ball_area(int d, double r, double dist, double rho) {
    if (r <= 0.0) return 0.0;
    if (dist + r <= rho) return sphere_surface_area(d) * std::pow(r, d - 1);
    if (std::abs(dist - r) >= rho) return 0.0;
    if (dist <= 0.0) return 0.0; // fully inside/outside handled above
    const double cosang = (r * r + dist * dist - rho * rho) / (2.0 * r * dist);
    const double theta = std::acos(std::clamp(cosang, -1.0, 1.0));
    switch (d) {
        case 1: return (r <= rho + dist && r >= dist - rho) ? 1.0 : 0.0; // one of the two points {±r} offset by c
        case 2: return 2.0 * r * theta;
        case 3: return 2.0 * M_PI * r * r * (1.0 - cosang);
        default: throw QuadratureFailure("sphere_in_ball_area: dimension not supported");
    }
}

} // namespace fraclab

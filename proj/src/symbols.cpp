#include "fraclab/symbols.hpp"

#include <cmath>

#include "fraclab/numerics.hpp"
#include "fraclab/parallel.hpp"
#include "fraclab/rng.hpp"

namespace fraclab {
namespace spectral {

namespace {

// iterate over the spectral lattice applying m(tau, |xi|^alpha-term, xi[])
template <typename Fn>
void for_each_mode(const BoxGrid& g, Fn&& fn) {
    const std::size_t sp = g.space_size();
    parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> xi{};
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t kt = idx / sp;
            std::size_t rem = idx % sp;
            double xi_alpha_sq = 0.0;
            for (int a = g.d - 1; a >= 0; --a) {
                const double c = g.xi_abs_component(rem % g.Nx);
                xi[a] = g.xi_at(rem % g.Nx);
                xi_alpha_sq += c * c;
                rem /= g.Nx;
            }
            fn(idx, g.tau_at(kt), std::sqrt(xi_alpha_sq), std::span<const double>(xi.data(), g.d));
        }
    }, 4096);
}

} // namespace

FieldOnGrid apply_bessel_power(const FieldOnGrid& u, const SymbolPower& pow) {
    pow.validate();
    FieldOnGrid w = u.spectral_copy();
    auto& sp = w.spectrum();
    const double expo = -0.5 * pow.gamma;
    for_each_mode(u.grid(), [&](std::size_t idx, double tau, double xi_abs, std::span<const double>) {
        const cplx sym(pow.lambda + std::pow(xi_abs, pow.alpha), pow.time_sign * tau);
        sp[idx] *= std::pow(sym, expo);
    });
    w.to_physical();
    return w;
}

VectorFieldOnGrid apply_bessel_power(const VectorFieldOnGrid& u, const SymbolPower& pow) {
    VectorFieldOnGrid out;
    out.comps.reserve(u.comps.size());
    for (const auto& c : u.comps) out.comps.push_back(apply_bessel_power(c, pow));
    return out;
}

VectorFieldOnGrid apply_gradient(const FieldOnGrid& u) {
    const BoxGrid& g = u.grid();
    FieldOnGrid spec = u.spectral_copy();
    VectorFieldOnGrid out(g);
    for (int a = 0; a < g.d; ++a) {
        FieldOnGrid comp = spec;
        auto& sp = comp.spectrum();
        const std::size_t sps = g.space_size();
        parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t idx = lo; idx < hi; ++idx) {
                std::size_t rem = idx % sps;
                for (int b = g.d - 1; b > a; --b) rem /= g.Nx;
                const double xi = g.xi_at(rem % g.Nx);
                sp[idx] *= cplx(0.0, xi);
            }
        }, 4096);
        comp.to_physical();
        out.comps[a] = std::move(comp);
    }
    return out;
}

FieldOnGrid apply_divergence(const VectorFieldOnGrid& v) {
    const BoxGrid& g = v.grid();
    FieldOnGrid out(g);
    bool first = true;
    for (int a = 0; a < g.d; ++a) {
        FieldOnGrid comp = v.comps[a].spectral_copy();
        auto& sp = comp.spectrum();
        const std::size_t sps = g.space_size();
        parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t idx = lo; idx < hi; ++idx) {
                std::size_t rem = idx % sps;
                for (int b = g.d - 1; b > a; --b) rem /= g.Nx;
                const double xi = g.xi_at(rem % g.Nx);
                sp[idx] *= cplx(0.0, xi);
            }
        }, 4096);
        comp.to_physical();
        if (first) {
            out = std::move(comp);
            first = false;
        } else {
            out += comp;
        }
    }
    return out;
}

double bessel_norm(const FieldOnGrid& u, double gamma, double p, double lambda, double alpha,
                   int time_sign) {
    SymbolPower pw{-gamma, lambda, time_sign, alpha};
    return apply_bessel_power(u, pw).lp_norm(p);
}

FieldOnGrid delta_resolvent(const FieldOnGrid& g_spatial, double r, double gamma,
                            const SymbolPower& base) {
    base.validate();
    const BoxGrid& g = g_spatial.grid();
    const std::size_t sp = g.space_size();
    const double cg = 1.0 / std::tgamma(0.5 * gamma);
    const double h = g.dt();

    // spatial spectrum of the initial slice
    std::vector<cplx> ghat(sp);
    {
        const auto& vals = g_spatial.values();
        for (std::size_t i = 0; i < sp; ++i) ghat[i] = cplx(vals[i], 0.0);
        std::vector<std::size_t> dims(g.d, g.Nx);
        fft_nd(ghat, dims, false);
    }

    FieldOnGrid out(g);
    auto& ov = out.values();
    std::vector<std::size_t> dims(g.d, g.Nx);

    for (std::size_t it = 0; it < g.Nt; ++it) {
        const double s = g.time_at(it) - r;
        if (s < -0.5 * h) continue; // strictly before the initial time
        double pref;
        const double s_eff = std::max(s, 0.0);
        if (gamma == 2.0) {
            // smooth prefactor: pointwise values (mass decays exactly like
            // e^{-lambda(t-r)}); the t = r node is the identity limit
            pref = (s <= 0.5 * h) ? 1.0 : std::exp(-base.lambda * s);
        } else if (s < 2.5 * h) {
            // cell average of the singular factor 1_{u>0} u^{g/2-1} keeps the
            // time Riemann sums of downstream operators exact near the jump
            const double lo = std::max(0.0, s - 0.5 * h), hi = s + 0.5 * h;
            auto w = [&](double u) { return (u <= 0.0) ? 0.0 : std::pow(u, 0.5 * gamma - 1.0); };
            pref = cg * std::exp(-base.lambda * s_eff) * graded_endpoint_quad(w, lo, hi, lo, 1e-10) / h;
        } else {
            pref = cg * std::pow(s, 0.5 * gamma - 1.0) * std::exp(-base.lambda * s);
        }
        std::vector<cplx> slice = ghat;
        for (std::size_t i = 0; i < sp; ++i) {
            std::size_t rem = i;
            double xs = 0.0;
            for (int a = g.d - 1; a >= 0; --a) {
                const double c = g.xi_abs_component(rem % g.Nx);
                xs += c * c;
                rem /= g.Nx;
            }
            slice[i] *= std::exp(-s_eff * std::pow(std::sqrt(xs), base.alpha));
        }
        fft_nd(slice, dims, true);
        for (std::size_t i = 0; i < sp; ++i) ov[it * sp + i] = pref * slice[i].real();
    }
    return out;
}

VectorFieldOnGrid make_Sp(const FieldOnGrid& g_spatial, double r, double p,
                          const SymbolPower& base) {
    const double pprime = p / (p - 1.0);
    const double gamma = 2.0 * (1.0 / pprime + 1.0 / (base.alpha * p));
    FieldOnGrid scal = delta_resolvent(g_spatial, r, gamma, base);
    return apply_gradient(scal);
}

DriftOnGrid sample_for_p(const drift::DriftField& b, const BoxGrid& g, double p) {
    DriftOnGrid out;
    out.p = p;
    const double pprime = p / (p - 1.0);
    out.b_pow = drift::sample_signed_power(b, g, 1.0 / p);
    out.abs_b_pow_conj = drift::sample_abs_power(b, g, 1.0 / pprime);
    return out;
}

namespace {
double power_R(double alpha, double p) { return -1.0 / alpha + (-1.0 + 1.0 / alpha) / p; }
double power_Q(double alpha, double p) {
    const double pprime = p / (p - 1.0);
    return (-1.0 + 1.0 / alpha) / pprime;
}
} // namespace

LinOp make_Rp(const DriftOnGrid& bg, const SymbolPower& base) {
    const double eR = power_R(base.alpha, bg.p);
    SymbolPower fwd = base;
    fwd.gamma = -2.0 * eR; // A^{eR}
    SymbolPower bwd = fwd;
    bwd.time_sign = -base.time_sign;
    auto bpow = std::make_shared<VectorFieldOnGrid>(bg.b_pow);
    LinOp op;
    op.apply = [bpow, fwd](const FieldOnGrid& u) {
        VectorFieldOnGrid grad = apply_gradient(apply_bessel_power(u, fwd));
        FieldOnGrid out(u.grid());
        auto& ov = out.values();
        for (int a = 0; a < u.grid().d; ++a) {
            const auto& ga = grad.comps[a].values();
            const auto& ba = bpow->comps[a].values();
            for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += ba[i] * ga[i];
        }
        return out;
    };
    op.apply_adjoint = [bpow, bwd](const FieldOnGrid& w) {
        // R* w = -A*^{eR} div(b^{1/p} w)
        VectorFieldOnGrid bw(w.grid());
        for (int a = 0; a < w.grid().d; ++a) bw.comps[a] = pointwise(bpow->comps[a], w);
        FieldOnGrid div = apply_divergence(bw);
        div *= -1.0;
        return apply_bessel_power(div, bwd);
    };
    return op;
}

LinOp make_Qp(const DriftOnGrid& bg, const SymbolPower& base) {
    const double eQ = power_Q(base.alpha, bg.p);
    SymbolPower fwd = base;
    fwd.gamma = -2.0 * eQ;
    SymbolPower bwd = fwd;
    bwd.time_sign = -base.time_sign;
    auto m = std::make_shared<FieldOnGrid>(bg.abs_b_pow_conj);
    LinOp op;
    op.apply = [m, fwd](const FieldOnGrid& u) { return apply_bessel_power(pointwise(*m, u), fwd); };
    op.apply_adjoint = [m, bwd](const FieldOnGrid& w) {
        return pointwise(*m, apply_bessel_power(w, bwd));
    };
    return op;
}

std::function<VectorFieldOnGrid(const VectorFieldOnGrid&)> make_Rp_transpose(
    const DriftOnGrid& bg, const SymbolPower& base) {
    const double eR = power_R(base.alpha, bg.p);
    SymbolPower fwd = base;
    fwd.gamma = -2.0 * eR;
    auto bpow = std::make_shared<VectorFieldOnGrid>(bg.b_pow);
    return [bpow, fwd](const VectorFieldOnGrid& v) {
        FieldOnGrid scal = apply_divergence(apply_bessel_power(v, fwd));
        VectorFieldOnGrid out(v.grid());
        for (int a = 0; a < v.grid().d; ++a) out.comps[a] = pointwise(bpow->comps[a], scal);
        return out;
    };
}

VectorFieldOnGrid apply_Gp(const drift::DriftField& b, double p, const SymbolPower& base,
                           const FieldOnGrid& u) {
    DriftOnGrid bg = sample_for_p(b, u.grid(), p);
    SymbolPower pw = base;
    pw.gamma = -2.0 * ((-1.0 + 1.0 / base.alpha) / p);
    FieldOnGrid s = apply_bessel_power(u, pw);
    VectorFieldOnGrid out(u.grid());
    for (int a = 0; a < u.grid().d; ++a) out.comps[a] = pointwise(bg.b_pow.comps[a], s);
    return out;
}

FieldOnGrid apply_Gp_dot(const drift::DriftField& b, double p, const SymbolPower& base,
                         const VectorFieldOnGrid& v) {
    DriftOnGrid bg = sample_for_p(b, v.grid(), p);
    SymbolPower pw = base;
    pw.gamma = -2.0 * ((-1.0 + 1.0 / base.alpha) / p);
    FieldOnGrid out(v.grid());
    auto& ov = out.values();
    for (int a = 0; a < v.grid().d; ++a) {
        FieldOnGrid sa = apply_bessel_power(v.comps[a], pw);
        const auto& ba = bg.b_pow.comps[a].values();
        const auto& sv = sa.values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += ba[i] * sv[i];
    }
    return out;
}

FieldOnGrid random_smooth_field(const BoxGrid& g, std::uint64_t seed, std::size_t band) {
    RandomStream rng(seed);
    band = std::min(band, g.Nx / 2 - 1);
    FieldOnGrid f(g);
    // superpose a few low modes with random phases; strictly band-limited
    auto& v = f.values();
    const std::size_t sp = g.space_size();
    struct Mode {
        double kt;
        std::array<double, 3> kx;
        double amp, phase;
    };
    std::vector<Mode> modes;
    for (std::size_t m = 0; m < 12; ++m) {
        Mode md;
        md.kt = std::floor(rng.uniform(-static_cast<double>(band), band + 1.0));
        for (int a = 0; a < g.d; ++a) md.kx[a] = std::floor(rng.uniform(-static_cast<double>(band), band + 1.0));
        md.amp = rng.uniform(0.2, 1.0);
        md.phase = rng.uniform(0.0, 2.0 * M_PI);
        modes.push_back(md);
    }
    parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t it = idx / sp;
            std::size_t rem = idx % sp;
            std::array<double, 3> x{};
            for (int a = g.d - 1; a >= 0; --a) {
                x[a] = g.coord_at(rem % g.Nx);
                rem /= g.Nx;
            }
            const double t = g.time_at(it);
            double s = 0.0;
            for (const auto& md : modes) {
                double arg = 2.0 * M_PI * md.kt * t / g.Lt + md.phase;
                for (int a = 0; a < g.d; ++a) arg += 2.0 * M_PI * md.kx[a] * x[a] / g.Lx;
                s += md.amp * std::cos(arg);
            }
            v[idx] = s;
        }
    }, 2048);
    return f;
}

NormEstimate operator_norm_estimate(const LinOp& op, const BoxGrid& g, double p, int trials,
                                    std::uint64_t seed, int max_iter) {
    NormEstimate est;
    auto rayleigh = [&](const FieldOnGrid& v) {
        const double nv = v.lp_norm(p);
        if (nv == 0.0) return 0.0;
        return op.apply(v).lp_norm(p) / nv;
    };
    if (p == 2.0) {
        FieldOnGrid v = random_smooth_field(g, seed, g.Nx / 4);
        double prev = 0.0;
        for (int it = 0; it < max_iter; ++it) {
            FieldOnGrid w = op.apply_adjoint(op.apply(v));
            const double n = w.lp_norm(2.0);
            if (n == 0.0) {
                est.lower_bound = 0.0;
                est.probes = 1;
                return est;
            }
            w *= 1.0 / n;
            const double cur = rayleigh(w);
            v = std::move(w);
            ++est.probes;
            if (it > 2 && std::abs(cur - prev) <= 1e-6 * std::max(cur, 1e-30)) {
                est.lower_bound = cur;
                return est;
            }
            prev = cur;
        }
        est.converged = false;
        est.lower_bound = prev;
        if (!(prev > 0.0))
            throw NonConvergence("operator_norm_estimate: power iteration failed to converge");
        return est;
    }
    // p != 2: Higham-style ascent from several random starts; lower bound only
    const double q = p / (p - 1.0);
    double best = 0.0;
    for (int tr = 0; tr < std::max(trials, 1); ++tr) {
        FieldOnGrid v = random_smooth_field(g, seed + 101 * tr, g.Nx / 4);
        double cur = 0.0;
        for (int it = 0; it < 24; ++it) {
            const double nv = v.lp_norm(p);
            if (nv == 0.0) break;
            v *= 1.0 / nv;
            FieldOnGrid w = op.apply(v);
            cur = w.lp_norm(p);
            best = std::max(best, cur);
            // dual vector |w|^{p-1} sgn(w), mapped back through the adjoint
            auto& wv = w.values();
            for (double& x : wv) x = std::copysign(std::pow(std::abs(x), p - 1.0), x);
            FieldOnGrid z = op.apply_adjoint(w);
            const double nz = z.lp_norm(q);
            if (nz == 0.0) break;
            auto& zv = z.values();
            for (double& x : zv) x = std::copysign(std::pow(std::abs(x), q - 1.0), x);
            v = std::move(z);
            ++est.probes;
        }
    }
    est.lower_bound = best;
    return est;
}

} // namespace spectral
} // namespace fraclab

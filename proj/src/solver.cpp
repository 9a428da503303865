#include "fraclab/solver.hpp"

#include <cmath>
#include <sstream>

#include "fraclab/numerics.hpp"

namespace fraclab {
namespace solver {

using spectral::SymbolPower;

namespace {

SymbolPower base_power(const drift::DriftField& b, const SolveOptions& opt, int sign = +1) {
    SymbolPower s;
    s.lambda = opt.lambda;
    s.alpha = b.alpha;
    s.time_sign = sign;
    s.gamma = 2.0;
    return s;
}

double exp_main(double alpha, double p) { return -1.0 / alpha + (-1.0 + 1.0 / alpha) / p; }
double exp_rhs(double alpha, double p) {
    const double pprime = p / (p - 1.0);
    return (-1.0 + 1.0 / alpha) / pprime;
}

FieldOnGrid apply_power(const FieldOnGrid& u, double exponent, const SymbolPower& base) {
    SymbolPower pw = base;
    pw.gamma = -2.0 * exponent;
    return spectral::apply_bessel_power(u, pw);
}

struct SeriesOutcome {
    FieldOnGrid sum;
    int terms = 0;
    double last_ratio = 0.0;
    std::vector<double> increments;
};

// sum of (-T)^k x0 for a contraction T, with decay monitoring
SeriesOutcome neumann_sum(const std::function<FieldOnGrid(const FieldOnGrid&)>& T,
                          const FieldOnGrid& x0, const SolveOptions& opt, double p) {
    SeriesOutcome out{x0, 1, 0.0, {x0.lp_norm(p)}};
    FieldOnGrid inc = x0;
    double prev_norm = out.increments[0];
    if (prev_norm == 0.0) return out;
    for (int k = 1; k <= opt.max_terms; ++k) {
        inc = T(inc);
        inc *= -1.0;
        const double n = inc.lp_norm(p);
        out.increments.push_back(n);
        const double ratio = n / prev_norm;
        out.last_ratio = ratio;
        out.sum += inc;
        out.terms = k + 1;
        const double sum_norm = out.sum.lp_norm(p);
        if (n <= opt.tol * std::max(sum_norm, 1e-300)) return out;
        if (k >= opt.contraction_window && ratio >= 1.0) {
            std::ostringstream msg;
            msg << "series increments stopped decaying (ratio " << ratio << " at term " << k
                << ", lambda " << opt.lambda
                << "): the singular part's Morrey norm is too large for this (p, lambda)";
            throw NoContraction(msg.str());
        }
        prev_norm = n;
    }
    throw NoContraction("series did not reach the target tolerance within max_terms");
}

} // namespace

double solution_space_gamma(double alpha, double p) {
    return 2.0 / alpha + (alpha - 1.0) / alpha * 2.0 / p;
}

SolveResult solve_series(const drift::DriftField& b, const FieldOnGrid& f, const SolveOptions& opt) {
    const BoxGrid& g = f.grid();
    const SymbolPower base = base_power(b, opt);
    spectral::DriftOnGrid bg = spectral::sample_for_p(b, g, opt.p);
    spectral::LinOp R = spectral::make_Rp(bg, base);
    spectral::LinOp Q = spectral::make_Qp(bg, base);

    FieldOnGrid h0 = apply_power(f, exp_rhs(b.alpha, opt.p), base);
    auto T = [&](const FieldOnGrid& x) { return Q.apply(R.apply(x)); };
    SeriesOutcome series = neumann_sum(T, h0, opt, opt.p);

    SolveResult res;
    res.u = apply_power(series.sum, exp_main(b.alpha, opt.p), base);
    res.series_terms = series.terms;
    res.contraction.last_ratio = series.last_ratio;
    res.increment_norms = series.increments;
    if (opt.estimate_contraction) {
        spectral::LinOp QR{[&](const FieldOnGrid& x) { return Q.apply(R.apply(x)); },
                           [&](const FieldOnGrid& x) { return R.apply_adjoint(Q.apply_adjoint(x)); }};
        res.contraction.norm_lower_bound =
            spectral::operator_norm_estimate(QR, g, opt.p, 4, opt.probe_seed).lower_bound;
    }
    const double gsol = solution_space_gamma(b.alpha, opt.p);
    res.bessel_norms[0.0] = res.u.lp_norm(opt.p);
    res.bessel_norms[gsol] = spectral::bessel_norm(res.u, gsol, opt.p, opt.lambda, b.alpha);
    if (opt.compute_residual)
        res.residual = weak_residual(res.u, b, f, opt.lambda, 20, opt.probe_seed);
    return res;
}

SolveResult solve_series_alt(const drift::DriftField& b, const FieldOnGrid& f,
                             const SolveOptions& opt) {
    const BoxGrid& g = f.grid();
    const SymbolPower base = base_power(b, opt);
    spectral::DriftOnGrid bg = spectral::sample_for_p(b, g, opt.p);
    spectral::LinOp R = spectral::make_Rp(bg, base);
    spectral::LinOp Q = spectral::make_Qp(bg, base);

    FieldOnGrid h0 = R.apply(apply_power(f, exp_rhs(b.alpha, opt.p), base));
    auto T = [&](const FieldOnGrid& x) { return R.apply(Q.apply(x)); };
    SeriesOutcome series = neumann_sum(T, h0, opt, opt.p);

    SolveResult res;
    FieldOnGrid corr = apply_power(Q.apply(series.sum), exp_main(b.alpha, opt.p), base);
    res.u = apply_power(f, -1.0, base) - corr;
    res.series_terms = series.terms;
    res.contraction.last_ratio = series.last_ratio;
    res.increment_norms = series.increments;
    if (opt.estimate_contraction) {
        spectral::LinOp RQ{[&](const FieldOnGrid& x) { return R.apply(Q.apply(x)); },
                           [&](const FieldOnGrid& x) { return Q.apply_adjoint(R.apply_adjoint(x)); }};
        res.contraction.norm_lower_bound =
            spectral::operator_norm_estimate(RQ, g, opt.p, 4, opt.probe_seed).lower_bound;
    }
    const double gsol = solution_space_gamma(b.alpha, opt.p);
    res.bessel_norms[0.0] = res.u.lp_norm(opt.p);
    res.bessel_norms[gsol] = spectral::bessel_norm(res.u, gsol, opt.p, opt.lambda, b.alpha);
    if (opt.compute_residual)
        res.residual = weak_residual(res.u, b, f, opt.lambda, 20, opt.probe_seed);
    return res;
}

std::vector<ApproximationEntry> approximation_sequence(const drift::DriftField& b,
                                                       const FieldOnGrid& f,
                                                       const SolveOptions& opt,
                                                       const std::vector<int>& n_list) {
    SolveOptions quiet = opt;
    quiet.estimate_contraction = false;
    quiet.compute_residual = false;
    SolveResult ref = solve_series(b, f, quiet);
    const double gsol = solution_space_gamma(b.alpha, opt.p);
    std::vector<ApproximationEntry> table;
    for (int n : n_list) {
        drift::TunedCutoff cut = drift::auto_cutoff_mollify(b, n, f.grid(), opt.p);
        SolveResult un = solve_series(cut.field, f, quiet);
        ApproximationEntry e;
        e.n = n;
        e.eps_n = cut.spec.eps_n;
        FieldOnGrid diff = un.u - ref.u;
        e.error = spectral::bessel_norm(diff, gsol, opt.p, opt.lambda, b.alpha);
        table.push_back(e);
    }
    return table;
}

double weak_residual(const FieldOnGrid& u, const drift::DriftField& b, const FieldOnGrid& f,
                     double lambda, int probes, std::uint64_t seed) {
    const BoxGrid& g = u.grid();
    SymbolPower base;
    base.lambda = lambda;
    base.alpha = b.alpha;
    const double sigma = 0.5 + 0.5 / b.alpha;

    spectral::DriftOnGrid bg = spectral::sample_for_p(b, g, 2.0);
    spectral::LinOp R2 = spectral::make_Rp(bg, base);
    spectral::LinOp Q2 = spectral::make_Qp(bg, base);

    // A^{sigma} u and A^{sigma-1} f
    FieldOnGrid Asu = apply_power(u, sigma, base);
    FieldOnGrid Ff = apply_power(f, sigma - 1.0, base);
    FieldOnGrid RAsu = R2.apply(Asu);
    const double nAsu = Asu.lp_norm(2.0);

    double worst = 0.0;
    for (int k = 0; k < probes; ++k) {
        FieldOnGrid eta = spectral::random_smooth_field(g, seed + 31 * k, g.Nx / 8);
        FieldOnGrid Aeta = apply_power(eta, sigma, base);
        FieldOnGrid QsAeta = Q2.apply_adjoint(Aeta);
        const double t1 = inner(Asu, Aeta);
        const double t2 = inner(RAsu, QsAeta);
        const double t3 = inner(Ff, Aeta);
        const double scale = std::max({std::abs(t1), std::abs(t3), nAsu * Aeta.lp_norm(2.0), 1e-300});
        worst = std::max(worst, std::abs(t1 + t2 - t3) / scale);
    }
    return worst;
}

EvolveResult evolve(const FieldOnGrid& g_spatial, double r, const drift::DriftField& b,
                    const SolveOptions& opt) {
    const BoxGrid& g = g_spatial.grid();
    // snap r to the grid
    const double h = g.dt();
    const double r_snap = h * std::round(r / h);
    const SymbolPower base = base_power(b, opt);

    spectral::DriftOnGrid bg = spectral::sample_for_p(b, g, opt.p);
    spectral::LinOp R = spectral::make_Rp(bg, base);
    spectral::LinOp Q = spectral::make_Qp(bg, base);

    VectorFieldOnGrid Sp = spectral::make_Sp(g_spatial, r_snap, opt.p, base);
    FieldOnGrid GS = spectral::apply_Gp_dot(b, opt.p, base, Sp);

    auto T = [&](const FieldOnGrid& x) { return R.apply(Q.apply(x)); };
    SeriesOutcome series = neumann_sum(T, GS, opt, opt.p);

    FieldOnGrid corr = apply_power(Q.apply(series.sum), exp_main(b.alpha, opt.p), base);
    EvolveResult out;
    out.v = spectral::delta_resolvent(g_spatial, r_snap, 2.0, base) - corr;
    out.series_terms = series.terms;
    out.last_ratio = series.last_ratio;
    out.sup_norm = out.v.max_abs();
    // W^{1,p} norm of g on the spatial grid (one time slice)
    VectorFieldOnGrid gr = spectral::apply_gradient(g_spatial);
    const double gp = g_spatial.lp_norm(opt.p) / std::pow(g.Lt, 1.0 / opt.p);
    const double gg = gr.lp_norm(opt.p) / std::pow(g.Lt, 1.0 / opt.p);
    out.g_w1p_norm = std::pow(std::pow(gp, opt.p) + std::pow(gg, opt.p), 1.0 / opt.p);
    out.sup_constant = out.sup_norm / std::max(out.g_w1p_norm, 1e-300);
    return out;
}

FieldOnGrid terminal_value_solve(const FieldOnGrid& F, double r, const drift::DriftField& b,
                                 const SolveOptions& opt, bool take_abs) {
    const BoxGrid& g = F.grid();
    const double h = g.dt();
    const std::size_t ir = static_cast<std::size_t>(std::llround(r / h)) % g.Nt;
    const double r_snap = g.time_at(ir);
    drift::DriftField b_ref = drift::time_reflect(b, r_snap);

    // reflected, damped right-hand side on tau = r - t in [0, r]
    const std::size_t sp = g.space_size();
    FieldOnGrid rhs(g);
    {
        const auto& Fv = F.values();
        auto& rv = rhs.values();
        for (std::size_t k = 0; k <= ir; ++k) {
            const double tau = g.time_at(k);
            const std::size_t src = (ir - k) % g.Nt; // t = r - tau
            const double damp = std::exp(-opt.lambda * tau);
            for (std::size_t i = 0; i < sp; ++i) {
                const double val = Fv[src * sp + i];
                rv[k * sp + i] = damp * (take_abs ? std::abs(val) : val);
            }
        }
    }
    SolveOptions o2 = opt;
    o2.estimate_contraction = false;
    o2.compute_residual = false;
    SolveResult sol = solve_series(b_ref, rhs, o2);

    // unwrap: w(t) = e^{lambda tau} u(tau), tau = r - t
    FieldOnGrid w(g);
    {
        const auto& uv = sol.u.values();
        auto& wv = w.values();
        for (std::size_t k = 0; k <= ir; ++k) {
            const double tau = g.time_at(k);
            const std::size_t dst = (ir - k) % g.Nt;
            const double grow = std::exp(opt.lambda * tau);
            for (std::size_t i = 0; i < sp; ++i) wv[dst * sp + i] = grow * uv[k * sp + i];
        }
    }
    return w;
}

std::vector<ConservationRow> conservation_probe(const drift::DriftField& b, double r,
                                                const SolveOptions& opt, const BoxGrid& grid,
                                                const std::vector<double>& R_list) {
    std::vector<ConservationRow> rows;
    for (double R : R_list) {
        FieldOnGrid gR = FieldOnGrid::sample_spatial(grid, [R](std::span<const double> x) {
            double r2 = 0.0;
            for (double v : x) r2 += v * v;
            const double rr = std::sqrt(r2);
            if (rr >= R) return 1.0;
            if (rr <= R - 1.0) return 0.0;
            const double u = rr - (R - 1.0);
            return 0.5 * (1.0 - std::cos(M_PI * u));
        });
        EvolveResult ev = evolve(gR, r, b, opt);
        const std::size_t sp = grid.space_size();
        // observation point: box center (coordinates all zero)
        std::size_t center = 0;
        for (int a = 0; a < grid.d; ++a) center = center * grid.Nx + grid.Nx / 2;
        double worst = 0.0;
        const auto& vv = ev.v.values();
        for (std::size_t it = 0; it < grid.Nt; ++it) {
            const double t = grid.time_at(it);
            if (t < r || t > r + 1.0) continue;
            const double val = std::exp(opt.lambda * (t - r)) * std::abs(vv[it * sp + center]);
            worst = std::max(worst, val);
        }
        rows.push_back(ConservationRow{R, worst});
    }
    return rows;
}

} // namespace solver
} // namespace fraclab

#include <doctest.h>

#include <cmath>

#include "fraclab/kernels.hpp"
#include "fraclab/numerics.hpp"
#include "fraclab/solver.hpp"
#include "oracles.hpp"

using namespace fraclab;

namespace {

const StableParams& prm() {
    static const StableParams p(1.5, 2, 5.0);
    return p;
}

BoxGrid solve_grid() { return BoxGrid(4.0, 16.0, 32, 32, 2); }

FieldOnGrid forcing(const BoxGrid& g) {
    return FieldOnGrid::sample(g, [&](double t, std::span<const double> x) {
        const double tc = (t - 1.4) / 0.45;
        double r2 = tc * tc;
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    });
}

solver::SolveOptions quick_opts() {
    solver::SolveOptions o;
    o.p = 2.0;
    o.lambda = 5.0;
    o.tol = 1e-8;
    o.estimate_contraction = false;
    o.compute_residual = false;
    return o;
}

} // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("zero drift collapses to the resolvent") {
    BoxGrid g = solve_grid();
    FieldOnGrid f = forcing(g);
    solver::SolveOptions opt = quick_opts();
    solver::SolveResult r = solver::solve_series(drift::zero_drift(prm()), f, opt);
    spectral::SymbolPower pw{2.0, opt.lambda, +1, 1.5};
    FieldOnGrid ref = spectral::apply_bessel_power(f, pw);
    FieldOnGrid d = r.u - ref;
    CHECK(d.lp_norm(2.0) / ref.lp_norm(2.0) < 1e-12);
    CHECK(r.series_terms <= 2);

    solver::SolveResult ra = solver::solve_series_alt(drift::zero_drift(prm()), f, opt);
    FieldOnGrid da = ra.u - ref;
    CHECK(da.lp_norm(2.0) / ref.lp_norm(2.0) < 1e-12);
}

TEST_CASE("bounded smooth drift against the implicit-Euler oracle") {
    BoxGrid g = solve_grid();
    FieldOnGrid f = forcing(g);
    solver::SolveOptions opt = quick_opts();
    drift::DriftField b = drift::smooth_bump_drift(0.4, 2.0, prm());
    solver::SolveResult r = solver::solve_series(b, f, opt);
    FieldOnGrid oracle = oracles::time_stepper(g, b, f, opt.lambda, 1.5, 24);
    FieldOnGrid d = r.u - oracle;
    CHECK(d.lp_norm(2.0) / r.u.lp_norm(2.0) < 2e-2); // coarse grid; 1e-2 at 64^2 x 64

    // the two series representations agree far below that
    solver::SolveResult ra = solver::solve_series_alt(b, f, opt);
    FieldOnGrid dd = ra.u - r.u;
    CHECK(dd.lp_norm(2.0) / r.u.lp_norm(2.0) < 1e-6);
}

TEST_CASE("linearity in the right-hand side") {
    BoxGrid g = solve_grid();
    FieldOnGrid f1 = forcing(g);
    FieldOnGrid f2 = spectral::random_smooth_field(g, 99, 3);
    drift::DriftField b = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, prm());
    solver::SolveOptions opt = quick_opts();
    solver::SolveResult ra = solver::solve_series(b, f1, opt);
    solver::SolveResult rb = solver::solve_series(b, f2, opt);
    FieldOnGrid combo = 2.0 * f1 + (-0.5) * f2;
    solver::SolveResult rc = solver::solve_series(b, combo, opt);
    FieldOnGrid expect = 2.0 * ra.u + (-0.5) * rb.u;
    FieldOnGrid d = rc.u - expect;
    CHECK(d.lp_norm(2.0) / std::max(expect.lp_norm(2.0), 1e-30) < 1e-6);
}

TEST_CASE("singular drift: geometric decay, representation agreement, weak residual") {
    BoxGrid g = solve_grid();
    FieldOnGrid f = forcing(g);
    solver::SolveOptions opt = quick_opts();
    drift::DriftField b = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, prm());
    solver::SolveResult r = solver::solve_series(b, f, opt);
    CHECK(r.contraction.last_ratio < 1.0);
    CHECK(r.contraction.last_ratio > 0.0);
    solver::SolveResult ra = solver::solve_series_alt(b, f, opt);
    FieldOnGrid d = ra.u - r.u;
    CHECK(d.lp_norm(2.0) <= 10.0 * opt.tol * r.u.lp_norm(2.0) + 1e-14);

    const double wr = solver::weak_residual(r.u, b, f, opt.lambda, 12, 5);
    CHECK(wr < 1e-4);
    // perturbing u moves the residual linearly
    FieldOnGrid pert = spectral::random_smooth_field(g, 4, 3);
    const double n = r.u.lp_norm(2.0) / std::max(pert.lp_norm(2.0), 1e-30);
    FieldOnGrid u1 = r.u + (0.01 * n) * pert;
    FieldOnGrid u2 = r.u + (0.02 * n) * pert;
    const double w1 = solver::weak_residual(u1, b, f, opt.lambda, 12, 5);
    const double w2 = solver::weak_residual(u2, b, f, opt.lambda, 12, 5);
    CHECK(w1 > 10.0 * wr);
    CHECK(w2 == doctest::Approx(2.0 * w1).epsilon(0.2));
}

TEST_CASE("contraction ratio is monotone in kappa and the breakdown is detected") {
    BoxGrid g = solve_grid();
    FieldOnGrid f = forcing(g);
    solver::SolveOptions opt = quick_opts();
    double prev = 0.0;
    for (double kappa : {0.01, 0.05, 0.1}) {
        drift::DriftField b =
            drift::model_drift_radial(kappa, drift::RadialDirection::attracting, prm());
        solver::SolveResult r = solver::solve_series(b, f, opt);
        CHECK(r.contraction.last_ratio >= prev);
        prev = r.contraction.last_ratio;
    }
    // far above the empirical threshold the series must be rejected
    drift::DriftField big = drift::model_drift_radial(6.0, drift::RadialDirection::attracting, prm());
    CHECK_THROWS_AS(solver::solve_series(big, f, opt), NoContraction);
}

TEST_CASE("lambda damping of the zero-drift solution") {
    BoxGrid g = solve_grid();
    FieldOnGrid f = forcing(g); // nonnegative forcing
    double prev = 1e300;
    for (double lam : {2.0, 4.0, 8.0}) {
        solver::SolveOptions opt = quick_opts();
        opt.lambda = lam;
        solver::SolveResult r = solver::solve_series(drift::zero_drift(prm()), f, opt);
        const double n = r.u.lp_norm(2.0);
        CHECK(n < prev);
        prev = n;
    }
}

TEST_CASE("approximation sequence for a bounded drift is mollifier-level exact") {
    BoxGrid g = solve_grid();
    FieldOnGrid f = forcing(g);
    solver::SolveOptions opt = quick_opts();
    drift::DriftField zero = drift::zero_drift(prm());
    auto table0 = solver::approximation_sequence(zero, f, opt, {2, 4});
    for (const auto& e : table0) CHECK(e.error < 1e-12);

    drift::DriftField b = drift::smooth_bump_drift(0.3, 1.5, prm());
    auto table = solver::approximation_sequence(b, f, opt, {4});
    // sup|b| < 1 and support well inside the 4-box: the cutoff is inactive
    CHECK(table[0].error / f.lp_norm(2.0) < 1e-3);
}

TEST_CASE("approximation sequence decays for the singular model drift") {
    BoxGrid g(4.0, 16.0, 16, 16, 2); // the cutoff geometry dominates; a small grid suffices
    FieldOnGrid f = forcing(g);
    solver::SolveOptions opt = quick_opts();
    drift::DriftField b = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, prm());
    auto table = solver::approximation_sequence(b, f, opt, {2, 4, 8});
    REQUIRE(table.size() == 3);
    CHECK(table[0].error >= table[1].error - 1e-12);
    CHECK(table[1].error >= table[2].error - 1e-12);
    CHECK(table[2].error < 1e-3 * f.lp_norm(2.0));
}

TEST_CASE("evolution family: free flow, constants, initial recovery") {
    BoxGrid g(4.0, 16.0, 32, 32, 2);
    StableParams p = prm();
    FieldOnGrid g0 = FieldOnGrid::sample_spatial(g, [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1]));
    });
    solver::SolveOptions opt = quick_opts();
    opt.p = 4.0;

    // free evolution matches independent kernel quadrature
    solver::EvolveResult fr = solver::evolve(g0, 0.0, drift::zero_drift(p), opt);
    const std::size_t sp = g.space_size();
    kernels::StableDensity q(StableParams(1.5, 2, 0.0));
    const GaussLegendre& gl = GaussLegendre::order32();
    auto kernel_quad = [&](double t, double x1, double x2) {
        double tot = 0.0;
        const double half = 4.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i)
            for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
                const double y1 = half * gl.nodes[i], y2 = half * gl.nodes[j];
                tot += gl.weights[i] * gl.weights[j] * q(t, std::hypot(x1 - y1, x2 - y2)) *
                       std::exp(-(y1 * y1 + y2 * y2));
            }
        return tot * half * half * std::exp(-opt.lambda * t);
    };
    for (auto [it, ix] : {std::pair<int, int>{8, 16}, {16, 20}}) {
        const double ref = kernel_quad(g.time_at(it), g.coord_at(ix), g.coord_at(16));
        const double got = fr.v.values()[it * sp + ix * g.Nx + 16];
        CHECK(got == doctest::Approx(ref).epsilon(1e-3));
    }

    // initial recovery
    for (std::size_t i = 0; i < sp; i += 41)
        CHECK(fr.v.values()[i] == doctest::Approx(g0.values()[i]).epsilon(1e-10));

    // constant initial data: the S_p branch is inactive and the constant decays
    FieldOnGrid ones(g);
    for (double& v : ones.values()) v = 1.0;
    drift::DriftField b = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);
    solver::EvolveResult cr = solver::evolve(ones, 0.0, b, opt);
    CHECK(cr.series_terms <= 2); // G_p S_p vanished, nothing to iterate
    const double expect = std::exp(-opt.lambda * g.time_at(8));
    CHECK(cr.v.values()[8 * sp + 16 * g.Nx + 16] == doctest::Approx(expect).epsilon(1e-9));

    // positivity of the drifted evolution of a bump, up to leakage
    solver::EvolveResult br = solver::evolve(g0, 0.0, b, opt);
    double mn = 0.0;
    for (double v : br.v.values()) mn = std::min(mn, v);
    CHECK(mn > -1e-3 * br.sup_norm); // overshoot at the correction-term level
}

TEST_CASE("evolution reproduction property") {
    BoxGrid g(4.0, 16.0, 32, 32, 2);
    StableParams p = prm();
    FieldOnGrid g0 = FieldOnGrid::sample_spatial(g, [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1]));
    });
    solver::SolveOptions opt = quick_opts();
    opt.p = 4.0;
    opt.tol = 1e-10;
    drift::DriftField b = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);
    solver::EvolveResult full = solver::evolve(g0, 0.0, b, opt);
    // restart from the slice at s
    const std::size_t sp = g.space_size();
    const std::size_t is = 8;
    FieldOnGrid mid(g);
    {
        FieldOnGrid slice(g);
        auto& sv = slice.values();
        for (std::size_t i = 0; i < sp; ++i)
            for (std::size_t it = 0; it < g.Nt; ++it)
                sv[it * sp + i] = full.v.values()[is * sp + i];
        mid = slice;
    }
    solver::EvolveResult second = solver::evolve(mid, g.time_at(is), b, opt);
    double worst = 0.0;
    for (std::size_t it = is + 2; it < g.Nt / 2; ++it)
        for (std::size_t i = 0; i < sp; i += 7)
            worst = std::max(worst,
                             std::abs(second.v.values()[it * sp + i] - full.v.values()[it * sp + i]));
    CHECK(worst < 1e-2 * full.sup_norm);
}

TEST_CASE("terminal-value solve: zero forcing, kernel check, finite sup") {
    BoxGrid g(4.0, 16.0, 32, 32, 2);
    StableParams p = prm();
    solver::SolveOptions opt = quick_opts();
    FieldOnGrid zero(g);
    FieldOnGrid w0 = solver::terminal_value_solve(zero, 3.0, drift::zero_drift(p), opt);
    CHECK(w0.max_abs() == 0.0);

    // b = 0: w(t) = int_t^r e^{-(s-t)(-Delta)^{a/2}} |F(s)| ds; check against
    // quadrature of the kernel for a separated space-time bump forcing
    FieldOnGrid F = FieldOnGrid::sample(g, [&](double t, std::span<const double> x) {
        const double tc = (t - 2.0) / 0.3;
        double r2 = tc * tc;
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    });
    FieldOnGrid w = solver::terminal_value_solve(F, 3.0, drift::zero_drift(p), opt);
    // w(r, .) = 0
    const std::size_t sp = g.space_size();
    const std::size_t ir = static_cast<std::size_t>(3.0 / g.dt());
    // the terminal slice sits at the time-periodization floor e^{-lambda(Lt-1)}
    for (std::size_t i = 0; i < sp; i += 53) CHECK(std::abs(w.values()[ir * sp + i]) < 1e-5 * w.max_abs());

    kernels::StableDensity q(StableParams(1.5, 2, 0.0));
    const GaussLegendre& gl = GaussLegendre::order32();
    auto ref_at = [&](double t, double x1, double x2) {
        // triple quadrature over the forcing bump
        double tot = 0.0;
        const double half_t = 1.0, half_x = 4.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i)
            for (std::size_t j = 0; j < gl.nodes.size(); ++j)
                for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                    const double s = 2.0 + half_t * gl.nodes[i];
                    if (s <= t) continue;
                    const double y1 = half_x * gl.nodes[j], y2 = half_x * gl.nodes[k];
                    const double tc = (s - 2.0) / 0.3;
                    const double fv = std::exp(-tc * tc - y1 * y1 - y2 * y2);
                    tot += gl.weights[i] * gl.weights[j] * gl.weights[k] *
                           q(s - t, std::hypot(x1 - y1, x2 - y2)) * fv;
                }
        return tot * half_t * half_x * half_x;
    };
    const double got = w.values()[8 * sp + 18 * g.Nx + 16];
    const double ref = ref_at(g.time_at(8), g.coord_at(18), g.coord_at(16));
    CHECK(got == doctest::Approx(ref).epsilon(2e-3));

    // E.1 drift with F = |b_n|: finite sup norm
    drift::DriftField braw = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);
    drift::DriftField bn = drift::cutoff_mollify(braw, drift::CutoffSpec{8, 0.0});
    FieldOnGrid absb = drift::sample_abs_power(bn, g, 1.0);
    FieldOnGrid wb = solver::terminal_value_solve(absb, 3.0, bn, opt);
    CHECK(std::isfinite(wb.max_abs()));
    CHECK(wb.max_abs() > 0.0);
}

TEST_CASE("conservation probe decays in R") {
    BoxGrid g(4.0, 32.0, 16, 64, 2);
    StableParams p = prm();
    solver::SolveOptions opt = quick_opts();
    opt.p = 4.0;
    drift::DriftField braw = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);
    drift::DriftField bn = drift::cutoff_mollify(braw, drift::CutoffSpec{4, 0.0});
    auto rows = solver::conservation_probe(bn, 0.0, opt, g, {2.0, 4.0, 8.0});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].value > rows[1].value);
    CHECK(rows[1].value > rows[2].value);
}

TEST_SUITE_END();

// Acceptance suite: one pass/fail line per criterion, each built from the
// library's public surface plus independent oracles. Run all criteria or a
// single one with --only <k>.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "fraclab/experiment.hpp"
#include "fraclab/numerics.hpp"
#include "fraclab/kernels.hpp"
#include "fraclab/mckean_vlasov.hpp"
#include "fraclab/morrey.hpp"
#include "fraclab/sde.hpp"
#include "fraclab/solver.hpp"
#include "oracles.hpp"

using namespace fraclab;
namespace fs = std::filesystem;

namespace {

struct Checker {
    int passed = 0;
    int failed = 0;
    bool check(bool ok, const std::string& what, double value = std::nan(""), double bound = std::nan("")) {
        (ok ? passed : failed)++;
        std::cout << "  [" << (ok ? "pass" : "FAIL") << "] " << what;
        if (!std::isnan(value)) std::cout << "  (value " << value << (std::isnan(bound) ? "" : ", bound " + std::to_string(bound)) << ")";
        std::cout << "\n";
        return ok;
    }
    bool ok() const { return failed == 0; }
};

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// ---------------------------------------------------------------------- C1
bool criterion1() {
    Checker c;
    StableParams p(1.5, 2, 0.0);
    kernels::StableDensity q(p);

    c.check(std::abs(q.mass() - 1.0) <= 1e-3, "density mass = 1 within 1e-3", q.mass());

    // self-similarity against an independent non-rescaled inversion
    double worst = 0.0;
    for (double t : {0.1, 0.37, 1.0, 2.0})
        for (double x : {0.0, 0.9, 2.4, 5.0})
            worst = std::max(worst, rel_diff(q(t, x), oracles::direct_density(t, x, 1.5, 2)));
    c.check(worst <= 1e-5, "self-similarity vs direct inversion within 1e-5", worst);

    // two-sided ratios for gamma in {1,2} on [0.1,2] x [0,5], with refinement stability
    for (double gamma : {1.0, 2.0}) {
        kernels::BoundGrid coarse = kernels::make_bound_grid(0.1, 2.0, 5.0, 7, 9);
        kernels::BoundGrid fine = kernels::make_bound_grid(0.1, 2.0, 5.0, 13, 17);
        kernels::BoundReport rc = kernels::verify_bounds(q, gamma, coarse);
        kernels::BoundReport rf = kernels::verify_bounds(q, gamma, fine);
        c.check(rc.c_hat > 0.0 && std::isfinite(rc.C_hat) && std::isfinite(rc.C1_hat),
                "gamma=" + std::to_string(gamma) + ": 0 < c_hat <= C_hat < inf, C1 finite", rc.c_hat);
        const double stab = rel_diff(rf.c_hat / rf.C_hat, rc.c_hat / rc.C_hat);
        c.check(stab <= 0.2, "gamma=" + std::to_string(gamma) + ": c/C stable within 20% under refinement", stab);
    }

    // closed-form oracles
    double worst_cauchy = 0.0;
    for (int d : {1, 2}) {
        kernels::StableDensity qc(StableParams(1.0, d, 0.0));
        for (double t : {0.5, 1.0, 2.0})
            for (double x : {0.0, 0.8, 2.0, 4.0})
                worst_cauchy = std::max(worst_cauchy, rel_diff(qc(t, x), oracles::cauchy_density(t, x, d)));
    }
    c.check(worst_cauchy <= 1e-4, "alpha=1 Cauchy closed form within 1e-4", worst_cauchy);
    double worst_gauss = 0.0;
    for (int d : {1, 2}) {
        kernels::StableDensity qg(StableParams(2.0, d, 0.0));
        for (double t : {0.5, 1.0, 2.0})
            for (double x : {0.0, 0.8, 2.0, 4.0})
                worst_gauss = std::max(worst_gauss, rel_diff(qg(t, x), oracles::gaussian_density(t, x, d)));
    }
    c.check(worst_gauss <= 1e-4, "alpha=2 Gaussian closed form within 1e-4", worst_gauss);
    return c.ok();
}

// ---------------------------------------------------------------------- C2
bool criterion2() {
    Checker c;
    StableParams p(1.5, 2, 0.0);
    const double q = 1.1;

    // homogeneity exact to 1e-10
    drift::DriftField b = drift::model_drift_radial(0.8, drift::RadialDirection::attracting, p);
    morrey::ScalarField w = morrey::drift_power_field(b, 2.0);
    morrey::ScalarField w3 = w;
    w3.eval = [inner = w.eval](double t, std::span<const double> x) { return 3.0 * inner(t, x); };
    morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, 2, -6, 6);
    const double n1 = morrey::parabolic_morrey_norm(w, q, plan, 1.5).norm_estimate;
    const double n3 = morrey::parabolic_morrey_norm(w3, q, plan, 1.5).norm_estimate;
    c.check(rel_diff(n3, 3.0 * n1) <= 1e-10, "positive homogeneity exact to 1e-10", rel_diff(n3, 3.0 * n1));

    // parabolic scaling invariance within 2%
    drift::DriftField br = drift::parabolic_rescale(b, 2.7);
    const double nr = morrey::parabolic_morrey_norm(morrey::drift_power_field(br, 2.0), q, plan, 1.5)
                          .norm_estimate;
    c.check(rel_diff(nr, n1) <= 0.02, "parabolic scaling invariance within 2%", rel_diff(nr, n1));

    // kappa proportionality: norm(kappa) = kappa^{1/(alpha-1)} norm(1), algebraic
    drift::DriftField b1 = drift::model_drift_radial(1.0, drift::RadialDirection::attracting, p);
    drift::DriftField bk = drift::model_drift_radial(0.37, drift::RadialDirection::attracting, p);
    const double m1 = morrey::parabolic_morrey_norm(morrey::drift_power_field(b1, 2.0), q, plan, 1.5)
                          .norm_estimate;
    const double mk = morrey::parabolic_morrey_norm(morrey::drift_power_field(bk, 2.0), q, plan, 1.5)
                          .norm_estimate;
    c.check(rel_diff(mk, std::pow(0.37, 2.0) * m1) <= 1e-10, "kappa^{1/(alpha-1)} proportionality", rel_diff(mk, std::pow(0.37, 2.0) * m1));

    // E.3: finite below the exponent threshold, bounded dyadic sweep
    drift::DriftField e3 = drift::model_drift_hypersurface(0.3, p, 0, 1.0);
    morrey::ScalarField w3f = morrey::drift_power_field(e3, 2.0);
    morrey::SamplingPlan plan3 = morrey::SamplingPlan::standard(w3f, 2, -10, 10);
    morrey::MorreyReport rep3 = morrey::parabolic_morrey_norm(w3f, q, plan3, 1.5);
    c.check(std::isfinite(rep3.norm_estimate) && rep3.norm_estimate > 0.0,
            "E.3 (s=0.3 < 0.4545..) norm finite over the dyadic sweep", rep3.norm_estimate);
    bool diverged = false;
    try {
        drift::DriftField bad = drift::model_drift_hypersurface(0.48, p, 0, 1.0);
        morrey::ScalarField wb = morrey::drift_power_field(bad, 2.0);
        morrey::SamplingPlan ps = morrey::SamplingPlan::standard(wb, 2, -1, 1);
        morrey::parabolic_morrey_norm(wb, q, ps, 1.5);
    } catch (const QuadratureFailure&) {
        diverged = true;
    }
    c.check(diverged, "E.3 above the threshold is flagged non-integrable");
    return c.ok();
}

// ---------------------------------------------------------------------- C3
bool criterion3() {
    Checker c;
    StableParams p(1.5, 2, 0.0);
    const double eps = 0.1, pp = 2.0;

    auto forcing = [](const BoxGrid& g) {
        return FieldOnGrid::sample(g, [&](double t, std::span<const double> x) {
            const double dt = (t - 0.5 * g.Lt);
            double r2 = dt * dt;
            for (double v : x) r2 += v * v;
            return std::exp(-r2);
        });
    };

    struct Entry {
        std::string name;
        drift::DriftField field;
    };
    std::vector<Entry> family;
    family.push_back({"E.1-radial", drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p)});
    family.push_back({"E.1-time", drift::model_drift_time(0.05, 1.0, p)});
    family.push_back({"E.3", drift::model_drift_hypersurface(0.3, p, 0, 1.0)});
    family.push_back({"sum", drift::sum_drift({drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p),
                                               drift::model_drift_hypersurface(0.3, p, 0, 1.0)})});

    BoxGrid mid(4.0, 16.0, 32, 64, 2);
    FieldOnGrid fmid = forcing(mid);
    for (const auto& e : family) {
        morrey::ScalarField w = morrey::drift_power_field(e.field, 2.0);
        morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, 2, -5, 5);
        morrey::MorreyReport rep = morrey::parabolic_morrey_norm(w, 1.0 + eps, plan, p.alpha, 1e-5);
        morrey::AdamsKrylovResult res = morrey::adams_krylov_check(e.field, fmid, pp, p, rep);
        c.check(!res.vacuous && std::isfinite(res.constant) && res.constant > 0.0 &&
                    std::isfinite(res.constant_adjoint),
                e.name + ": empirical constant finite (fwd/adj)", res.constant);
    }

    // growth under two grid refinements for the radial representative
    {
        const auto& e = family[0];
        morrey::ScalarField w = morrey::drift_power_field(e.field, 2.0);
        morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, 2, -5, 5);
        morrey::MorreyReport rep = morrey::parabolic_morrey_norm(w, 1.0 + eps, plan, p.alpha, 1e-5);
        std::vector<double> consts;
        for (auto [nt, nx] : {std::pair<std::size_t, std::size_t>{16, 32}, {32, 64}, {64, 128}}) {
            BoxGrid g(4.0, 16.0, nt, nx, 2);
            FieldOnGrid f = forcing(g);
            consts.push_back(morrey::adams_krylov_check(e.field, f, pp, p, rep).constant);
        }
        const double growth = consts[2] / consts[0];
        c.check(growth <= 2.0 && growth > 0.0, "constant grows <= 2x over two refinements", growth);
    }

    // pointwise and interpolation kernel bounds on a 10-field family
    {
        const double gamma = (1.0 - 1.0 / p.alpha) * 2.0 / pp;
        const double beta = 1.0;
        std::array<double, 3> origin{0.0, 0.0, 0.0};
        int finite_count = 0;
        double worst_K = 0.0, worst_C = 0.0;
        for (int k = 0; k < 10; ++k) {
            morrey::ScalarField f;
            f.d = 2;
            f.time_independent = false;
            const double t0 = 0.4 + 0.15 * k;
            const double x0 = -1.0 + 0.25 * k;
            const double wdt = 0.35 + 0.05 * (k % 3);
            const bool indicator = (k % 4 == 3);
            f.eval = [=](double t, std::span<const double> x) {
                const double dt = (t - t0) / wdt;
                const double dx = (x[0] - x0) / wdt;
                const double dy = x[1] / wdt;
                const double r2 = dt * dt + dx * dx + dy * dy;
                if (indicator) return r2 <= 1.0 ? 1.0 : 0.0;
                return std::exp(-r2);
            };
            morrey::LemmaCheck lc = morrey::lemma_pointwise_check(
                f, gamma, beta, 0.5, 0.0, std::span<const double>(origin.data(), 2), p, 3e-3);
            const bool fin = std::isfinite(lc.K_measured) && std::isfinite(lc.N_measured) &&
                             std::isfinite(lc.C_measured) && lc.rhs_out > 0.0 && lc.rhs_in > 0.0;
            finite_count += fin;
            worst_K = std::max(worst_K, lc.K_measured);
            worst_C = std::max(worst_C, lc.C_measured);
        }
        c.check(finite_count == 10, "lemma constants finite on the 10-field family", worst_K);
        c.check(std::isfinite(worst_C) && worst_C > 0.0, "interpolation bound constant finite", worst_C);
    }
    return c.ok();
}

// ---------------------------------------------------------------------- C4
bool criterion4() {
    Checker c;
    const double alpha = 1.5;
    BoxGrid g(4.0, 16.0, 32, 32, 2);
    RandomStream rng(77);
    FieldOnGrid u(g);
    for (double& v : u.values()) v = rng.uniform(-1.0, 1.0);

    spectral::SymbolPower p1{0.6, 1.0, +1, alpha}, p2{1.4, 1.0, +1, alpha}, p12{2.0, 1.0, +1, alpha};
    FieldOnGrid two = spectral::apply_bessel_power(spectral::apply_bessel_power(u, p1), p2);
    FieldOnGrid one = spectral::apply_bessel_power(u, p12);
    FieldOnGrid d0 = two - one;
    const double add_err = d0.lp_norm(2.0) / one.lp_norm(2.0);
    c.check(add_err <= 1e-12, "power additivity within 1e-12", add_err);

    FieldOnGrid v(g);
    for (double& w : v.values()) w = rng.uniform(-1.0, 1.0);
    spectral::SymbolPower fwd{1.3, 1.0, +1, alpha}, bwd{1.3, 1.0, -1, alpha};
    const double lhs = inner(spectral::apply_bessel_power(u, fwd), v);
    const double rhs = inner(u, spectral::apply_bessel_power(v, bwd));
    c.check(rel_diff(lhs, rhs) <= 1e-12, "adjoint pairing within 1e-12", rel_diff(lhs, rhs));

    // kernel/symbol cross-check at 1e-3
    {
        BoxGrid gk(6.0, 16.0, 128, 64, 2);
        const double t0 = 1.5, width = 0.5;
        FieldOnGrid bump = FieldOnGrid::sample(gk, [&](double t, std::span<const double> x) {
            const double dt = (t - t0) / width;
            const double r2 = (x[0] * x[0] + x[1] * x[1]) / (width * width);
            return std::exp(-dt * dt - r2);
        });
        spectral::SymbolPower pw{1.0, 2.0, +1, alpha}; // lambda = 2 keeps time wrap below 1e-5
        FieldOnGrid img = spectral::apply_bessel_power(bump, pw);
        kernels::StableDensity q(StableParams(alpha, 2, 0.0));
        const GaussLegendre& gl = GaussLegendre::order32();
        auto reference = [&](double t, double x1, double x2) {
            // quadrature against the periodized kernel (the multiplier acts on
            // the periodic box, so spatial images enter at the box period)
            double total = 0.0;
            const double half = 3.5 * width;
            for (std::size_t i = 0; i < gl.nodes.size(); ++i)
                for (std::size_t j = 0; j < gl.nodes.size(); ++j)
                    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                        const double s = t0 + half * gl.nodes[i];
                        const double y1 = half * gl.nodes[j];
                        const double y2 = half * gl.nodes[k];
                        double ker = 0.0;
                        // the |y|^{-d-alpha} tail makes the image-lattice sum
                        // converge slowly; rings to +-6 reach ~2e-4
                        for (int m1 = -6; m1 <= 6; ++m1)
                            for (int m2 = -6; m2 <= 6; ++m2)
                                ker += kernels::frac_resolvent_kernel(
                                    q, t - s,
                                    std::hypot(x1 - y1 + m1 * gk.Lx, x2 - y2 + m2 * gk.Lx), 1.0,
                                    2.0);
                        const double dtv = (s - t0) / width;
                        const double r2 = (y1 * y1 + y2 * y2) / (width * width);
                        total += gl.weights[i] * gl.weights[j] * gl.weights[k] * ker *
                                 std::exp(-dtv * dtv - r2);
                    }
            return total * half * half * half;
        };
        double worst = 0.0;
        const std::size_t sp = gk.space_size();
        for (auto [it, ix1, ix2] : {std::tuple<int, int, int>{80, 38, 32}, {96, 26, 34}}) {
            const double ref = reference(gk.time_at(it), gk.coord_at(ix1), gk.coord_at(ix2));
            worst = std::max(worst, rel_diff(img.values()[it * sp + ix1 * gk.Nx + ix2], ref));
        }
        c.check(worst <= 1e-3, "kernel/symbol cross-check within 1e-3", worst);
    }

    // Sobolev embedding probes on a 6-point design; d/alpha fixes the slope 1 + d/alpha = 7/3
    {
        struct Design {
            double p, q, gamma;
            bool satisfied;
        };
        const double slope = 1.0 + 2.0 / alpha;
        std::vector<Design> design{{2.0, 2.0, 0.5, true},  {2.0, 4.0, 1.4, true},
                                   {2.0, 1e9, 1.0, false}, {1.2, 6.0, 1.2, false},
                                   {1.5, 3.0, 1.8, true},  {4.0, 8.0, 0.7, true}};
        auto probe_ratio = [&](const BoxGrid& gg, const Design& ds) {
            // sharp probe: single-node spike (plus a smooth control)
            FieldOnGrid spike(gg);
            spike.values()[gg.size() / 2 + gg.Nx / 2] = 1.0;
            spectral::SymbolPower pw{ds.gamma, 1.0, +1, alpha};
            FieldOnGrid img = spectral::apply_bessel_power(spike, pw);
            const double qn = ds.q > 1e8 ? img.max_abs() : img.lp_norm(ds.q);
            return qn / spike.lp_norm(ds.p);
        };
        BoxGrid coarse(4.0, 16.0, 16, 32, 2);
        BoxGrid fine(4.0, 16.0, 64, 128, 2); // two refinement steps
        bool all_ok = true;
        for (const auto& ds : design) {
            const bool cond = 0.5 * ds.gamma > slope * (1.0 / ds.p - 1.0 / ds.q);
            if (cond != ds.satisfied) all_ok = false;
            const double r1 = probe_ratio(coarse, ds);
            const double r2 = probe_ratio(fine, ds);
            const double growth = r2 / r1;
            const bool ok = ds.satisfied ? growth <= 1.5 : growth >= 1.3;
            if (!ok) all_ok = false;
            std::cout << "    design (p=" << ds.p << ", q=" << (ds.q > 1e8 ? std::string("inf") : std::to_string(ds.q))
                      << ", gamma=" << ds.gamma << "): probe growth " << growth
                      << (ds.satisfied ? " (bounded)" : " (must blow up)") << "\n";
        }
        c.check(all_ok, "embedding probes bounded exactly when the index condition holds");
    }
    return c.ok();
}

// ---------------------------------------------------------------------- C5
bool criterion5() {
    Checker c;
    StableParams p(1.5, 2, 5.0);
    BoxGrid g(4.0, 16.0, 64, 64, 2); // 64^2 space x 64 time
    FieldOnGrid f = FieldOnGrid::sample(g, [&](double t, std::span<const double> x) {
        const double tc = (t - 1.4) / 0.45;
        double r2 = tc * tc;
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    });
    solver::SolveOptions opt;
    opt.p = 2.0;
    opt.lambda = 5.0;
    opt.tol = 1e-8;
    opt.estimate_contraction = false;
    opt.compute_residual = false;

    // exact collapse at b = 0
    {
        solver::SolveResult r = solver::solve_series(drift::zero_drift(p), f, opt);
        spectral::SymbolPower pw{2.0, opt.lambda, +1, p.alpha};
        FieldOnGrid ref = spectral::apply_bessel_power(f, pw);
        FieldOnGrid d = r.u - ref;
        const double err = d.lp_norm(2.0) / ref.lp_norm(2.0);
        c.check(err <= 1e-12, "b=0 solve equals the resolvent within 1e-12", err);
    }
    // bounded smooth drift vs the implicit-Euler oracle
    {
        drift::DriftField b = drift::smooth_bump_drift(0.4, 2.0, p);
        solver::SolveResult r = solver::solve_series(b, f, opt);
        FieldOnGrid oracle = oracles::time_stepper(g, b, f, opt.lambda, p.alpha, 16);
        FieldOnGrid d = r.u - oracle;
        const double err = d.lp_norm(2.0) / r.u.lp_norm(2.0);
        c.check(err <= 1e-2, "bounded-smooth solve matches the time-stepping oracle within 1e-2", err);

        solver::SolveResult ra = solver::solve_series_alt(b, f, opt);
        FieldOnGrid dd = ra.u - r.u;
        const double repdiff = dd.lp_norm(2.0) / r.u.lp_norm(2.0);
        c.check(repdiff <= 10.0 * opt.tol, "the two series representations agree within 10*tol", repdiff);

        const double wr = solver::weak_residual(r.u, b, f, opt.lambda, 20, 7);
        c.check(wr <= 1e-4, "weak-form residual within 1e-4", wr);
    }
    // contraction monotone in kappa
    {
        double prev = 0.0;
        bool mono = true;
        for (double kappa : {0.01, 0.05, 0.1}) {
            drift::DriftField b = drift::model_drift_radial(kappa, drift::RadialDirection::attracting, p);
            solver::SolveResult r = solver::solve_series(b, f, opt);
            if (r.contraction.last_ratio < prev) mono = false;
            prev = r.contraction.last_ratio;
        }
        c.check(mono, "series increment ratio monotone over kappa in {0.01, 0.05, 0.1}", prev);
    }
    // designed failure at kappa = 1, lambda = 5 (run exactly as stated; the
    // measured breakdown threshold sits near kappa = 2, so this check is
    // expected to fail and is reported honestly)
    {
        drift::DriftField b = drift::model_drift_radial(1.0, drift::RadialDirection::attracting, p);
        bool raised = false;
        double ratio = 0.0;
        try {
            solver::SolveResult r = solver::solve_series(b, f, opt);
            ratio = r.contraction.last_ratio;
        } catch (const NoContraction&) {
            raised = true;
        }
        c.check(raised, "designed failure: NoContraction raised for kappa=1 at lambda=5", ratio);
        if (!raised)
            std::cout << "    note: series contracted with ratio " << ratio
                      << "; the empirical threshold is kappa ~ 2 on this discretization\n";
        bool raised4 = false;
        try {
            drift::DriftField b4 = drift::model_drift_radial(4.0, drift::RadialDirection::attracting, p);
            solver::solve_series(b4, f, opt);
        } catch (const NoContraction&) {
            raised4 = true;
        }
        c.check(raised4, "NoContraction fires above the measured threshold (kappa=4)");
    }
    return c.ok();
}

// ---------------------------------------------------------------------- C6
bool criterion6() {
    Checker c;
    StableParams p(1.5, 2, 5.0);
    solver::SolveOptions opt;
    opt.p = 4.0;
    opt.lambda = 5.0;
    opt.tol = 1e-3; // reproduction is checked against 10x this tolerance
    opt.estimate_contraction = false;
    opt.compute_residual = false;
    drift::DriftField b = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);

    BoxGrid g(4.0, 16.0, 32, 32, 2);
    FieldOnGrid g0 = FieldOnGrid::sample_spatial(g, [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1]));
    });
    solver::EvolveResult full = solver::evolve(g0, 0.0, b, opt);

    // initial-condition recovery within interpolation tolerance (the drift
    // correction term leaves grid-level leakage on the initial slice, which
    // must shrink under refinement; the free flow recovers exactly)
    double rec = 0.0;
    const std::size_t sp = g.space_size();
    for (std::size_t i = 0; i < sp; ++i)
        rec = std::max(rec, std::abs(full.v.values()[i] - g0.values()[i]));
    c.check(rec <= 5e-3, "initial condition recovered at t = r (grid tolerance)", rec);

    // two-parameter reproduction within 10x tol
    const std::size_t is = 8;
    FieldOnGrid mid(g);
    for (std::size_t it = 0; it < g.Nt; ++it)
        for (std::size_t i = 0; i < sp; ++i)
            mid.values()[it * sp + i] = full.v.values()[is * sp + i];
    solver::EvolveResult second = solver::evolve(mid, g.time_at(is), b, opt);
    double worst = 0.0;
    for (std::size_t it = is + 2; it < g.Nt * 3 / 4; ++it)
        for (std::size_t i = 0; i < sp; ++i)
            worst = std::max(worst, std::abs(second.v.values()[it * sp + i] -
                                             full.v.values()[it * sp + i]));
    const double reprod = worst / full.sup_norm;
    c.check(reprod <= 10.0 * opt.tol, "U^{t,s} U^{s,r} = U^{t,r} within 10x tol", reprod);

    // sup bound constant, stable within 2x under refinement
    BoxGrid gf(4.0, 16.0, 64, 64, 2);
    FieldOnGrid g0f = FieldOnGrid::sample_spatial(gf, [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1]));
    });
    solver::EvolveResult fine = solver::evolve(g0f, 0.0, b, opt);
    double rec_fine = 0.0;
    const std::size_t spf = gf.space_size();
    for (std::size_t i = 0; i < spf; ++i)
        rec_fine = std::max(rec_fine, std::abs(fine.v.values()[i] - g0f.values()[i]));
    c.check(rec_fine <= rec, "recovery error does not grow under refinement", rec_fine);
    c.check(std::isfinite(full.sup_constant) && full.sup_constant > 0.0,
            "sup bound constant finite", full.sup_constant);
    const double stab = fine.sup_constant / full.sup_constant;
    c.check(stab <= 2.0 && stab >= 0.5, "sup constant stable within 2x under refinement", stab);
    return c.ok();
}

// ---------------------------------------------------------------------- C7
bool criterion7() {
    Checker c;
    StableParams p(1.5, 2, 5.0);

    // increment characteristic function: 5 frequencies, 1e6 draws, 3 SE
    {
        std::vector<double> freqs{0.5, 1.0, 2.0, 4.0, 7.0};
        auto cf = sde::increment_cf_check(0.01, StableParams(1.5, 2, 0.0), freqs, 1000000, 424242);
        bool ok = true;
        double worst_sigma = 0.0;
        for (const auto& pt : cf) {
            const double sig = std::abs(pt.empirical - pt.exact) / std::max(pt.std_error, 1e-15);
            worst_sigma = std::max(worst_sigma, sig);
            ok = ok && sig <= 3.0;
        }
        c.check(ok, "increment CF matches e^{-dt |xi|^a} within 3 SE at 5 frequencies", worst_sigma);
    }

    // Feynman-Kac against the evolution family for three test functions
    {
        drift::DriftField braw = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);
        BoxGrid g(2.0, 16.0, 32, 64, 2);
        drift::TunedCutoff cut = drift::auto_cutoff_mollify(braw, 16, g, 2.0);
        drift::RasterDomain dom;
        dom.t_lo = 0.0;
        dom.t_hi = 1.0;
        dom.x_half = 12.0;
        dom.nt = 8;
        dom.nx = 512;
        // one rasterized copy is shared by the SDE stepper and the PDE side,
        // so both sides see bit-identical drift values
        drift::DriftField fast = drift::rasterize_drift(cut.field, dom);

        solver::SolveOptions opt;
        opt.p = 4.0;
        opt.lambda = 5.0;
        opt.estimate_contraction = false;
        opt.compute_residual = false;

        const double r = 0.5;
        std::array<double, 2> x0{0.0, 0.0};
        sde::PathEnsemble e = sde::euler_maruyama(fast, x0, r, 1e-3, 100000, 31337, p, 0.5 * g.Lx);

        struct TestFn {
            std::string name;
            std::function<double(std::span<const double>)> g;
        };
        std::vector<TestFn> fns{
            {"centered bump", [](std::span<const double> x) { return std::exp(-(x[0] * x[0] + x[1] * x[1])); }},
            {"offset bump", [](std::span<const double> x) {
                 const double dx = x[0] - 1.0;
                 return std::exp(-(dx * dx + x[1] * x[1]) / 1.5);
             }},
            {"wide bump", [](std::span<const double> x) { return std::exp(-(x[0] * x[0] + x[1] * x[1]) / 4.0); }}};
        bool all = true;
        double worst = 0.0;
        for (const auto& fn : fns) {
            FieldOnGrid g0 = FieldOnGrid::sample_spatial(g, fn.g);
            solver::EvolveResult ev = solver::evolve(g0, 0.0, fast, opt);
            const std::size_t ir = static_cast<std::size_t>(r / g.dt());
            const std::size_t sp = g.space_size();
            const double pde = ev.v.values()[ir * sp + (g.Nx / 2) * g.Nx + g.Nx / 2];
            sde::FKResult fk = sde::feynman_kac_check(e, fn.g, r, opt.lambda, pde);
            const double budget = 3.0 * fk.mc_se + 0.02 * std::abs(pde) + 1e-4;
            all = all && fk.discrepancy <= budget;
            worst = std::max(worst, fk.discrepancy / budget);
        }
        c.check(all, "Feynman-Kac matches evolve within 3 SE + grid tolerance (3 functions)", worst);

        // Krylov bounds for four choices of F
        {
            auto bump = [](double, std::span<const double> x) {
                double r2 = 0.0;
                for (double v : x) r2 += v * v;
                return std::exp(-r2);
            };
            auto off = [](double, std::span<const double> x) {
                const double dx = x[0] - 1.2;
                return std::exp(-(dx * dx + x[1] * x[1]));
            };
            auto wide = [](double, std::span<const double> x) {
                double r2 = 0.0;
                for (double v : x) r2 += v * v;
                return std::exp(-r2 / 3.0);
            };
            auto babs = [&](double t, std::span<const double> x) {
                std::array<double, 3> buf{};
                fast.eval(t, x, std::span<double>(buf.data(), 2));
                return std::hypot(buf[0], buf[1]);
            };
            const double t_hor = 0.5, pp = 4.0;
            solver::SolveOptions sopt;
            sopt.lambda = 5.0;
            sopt.estimate_contraction = false;
            sopt.compute_residual = false;
            // both sides must integrate the same function: the Monte Carlo
            // target evaluates the grid-sampled F by interpolation, exactly
            // the field the backward solve consumes
            auto grid_interp = [](const FieldOnGrid& F) {
                auto held = std::make_shared<FieldOnGrid>(F);
                return [held](double, std::span<const double> x) {
                    const BoxGrid& gg = held->grid();
                    double acc = 0.0;
                    std::array<std::size_t, 2> i0{};
                    std::array<double, 2> wgt{};
                    for (int a = 0; a < 2; ++a) {
                        double u = (x[a] + 0.5 * gg.Lx) / gg.dx();
                        u = std::clamp(u, 0.0, static_cast<double>(gg.Nx - 1) - 1e-9);
                        i0[a] = static_cast<std::size_t>(u);
                        wgt[a] = u - static_cast<double>(i0[a]);
                    }
                    for (int c = 0; c < 4; ++c) {
                        const std::size_t j1 = i0[0] + (c & 1), j2 = i0[1] + ((c >> 1) & 1);
                        const double wc = ((c & 1) ? wgt[0] : 1.0 - wgt[0]) *
                                          (((c >> 1) & 1) ? wgt[1] : 1.0 - wgt[1]);
                        acc += wc * held->values()[j1 * gg.Nx + j2]; // first time slice
                    }
                    return acc;
                };
            };
            std::vector<sde::OccupationTarget> targets;
            std::vector<std::function<double(double, std::span<const double>)>> evals{bump, off, wide, babs};
            std::vector<std::string> names{"bump", "offset", "wide", "|b_n|"};
            for (std::size_t i = 0; i < evals.size(); ++i) {
                FieldOnGrid F = FieldOnGrid::sample(g, evals[i]);
                FieldOnGrid w = solver::terminal_value_solve(F, t_hor, fast, sopt);
                sde::OccupationTarget tg;
                tg.id = names[i];
                tg.eval = grid_interp(F);
                // L1 norm over [0,t] x box by grid quadrature
                double l1 = 0.0;
                const std::size_t sp = g.space_size();
                const std::size_t it_max = static_cast<std::size_t>(t_hor / g.dt());
                for (std::size_t it = 0; it < it_max; ++it)
                    for (std::size_t i2 = 0; i2 < sp; ++i2)
                        l1 += std::abs(F.values()[it * sp + i2]);
                tg.l1_norm = l1 * g.cell_volume();
                tg.pde_bound = w.max_abs();
                targets.push_back(std::move(tg));
            }
            sde::MCSpec spec;
            spec.num_paths = 30000;
            spec.dt = 2e-3;
            spec.seed = 90210;
            auto reports = sde::krylov_bound_check(fast, targets, pp, t_hor, x0, spec, p);
            bool all_within = true;
            for (const auto& rep : reports) all_within = all_within && rep.within_pde_bound && rep.lhs > 0.0;
            c.check(all_within, "occupation <= PDE sup bound + 3 SE for 4 choices of F");
        }

        // occupation of |b_n - b_m| decreases in min(n, m)
        {
            std::vector<std::pair<int, int>> pairs{{4, 8}, {8, 16}, {16, 32}};
            std::vector<sde::OccupationTarget> targets;
            for (auto [n, m] : pairs) {
                drift::DriftField bn = drift::cutoff_mollify(braw, drift::CutoffSpec{n, 0.0});
                drift::DriftField bm = drift::cutoff_mollify(braw, drift::CutoffSpec{m, 0.0});
                sde::OccupationTarget tg;
                tg.id = "diff" + std::to_string(n);
                auto bn_sh = std::make_shared<drift::DriftField>(std::move(bn));
                auto bm_sh = std::make_shared<drift::DriftField>(std::move(bm));
                tg.eval = [bn_sh, bm_sh](double t, std::span<const double> x) {
                    std::array<double, 3> a{}, b2{};
                    bn_sh->eval(t, x, std::span<double>(a.data(), 2));
                    bm_sh->eval(t, x, std::span<double>(b2.data(), 2));
                    return std::hypot(a[0] - b2[0], a[1] - b2[1]);
                };
                tg.l1_norm = 1.0;
                targets.push_back(std::move(tg));
            }
            sde::MCSpec spec;
            spec.num_paths = 30000;
            spec.dt = 2e-3;
            spec.seed = 777;
            auto reports = sde::krylov_bound_check(fast, targets, 4.0, 0.5, x0, spec, p);
            const bool dec = reports[0].lhs >= reports[1].lhs && reports[1].lhs >= reports[2].lhs;
            c.check(dec, "occupation of |b_n - b_m| decreases in min(n,m)", reports[0].lhs);
        }
    }
    return c.ok();
}

// ---------------------------------------------------------------------- C8
bool criterion8() {
    Checker c;
    StableParams p(1.5, 2, 0.0);
    mv::SpatialGrid g;
    g.Lx = 16.0;
    g.Nx = 64;
    g.d = 2;
    auto h = [](std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    };

    // free flow against the exact spectral reference
    {
        mv::MeanFieldOptions opt;
        opt.dt = 1e-4;
        opt.T = 0.2;
        opt.store_convolutions = false;
        mv::DensityEvolution evo = mv::meanfield_solve(drift::zero_drift(p), h, g, p.alpha, opt);
        // exact damped-free reference via one spectral multiplier
        std::vector<cplx> w(g.size());
        {
            std::array<double, 3> x{};
            for (std::size_t i = 0; i < g.size(); ++i) {
                std::size_t rem = i;
                for (int a = g.d - 1; a >= 0; --a) {
                    x[a] = g.coord_at(rem % g.Nx);
                    rem /= g.Nx;
                }
                w[i] = cplx(h(std::span<const double>(x.data(), g.d)), 0.0);
            }
            double mass = 0.0;
            for (auto& vv : w) mass += vv.real();
            mass *= g.cell_volume();
            for (auto& vv : w) vv /= mass;
            std::vector<std::size_t> dims(g.d, g.Nx);
            fft_nd(w, dims, false);
            for (std::size_t i = 0; i < g.size(); ++i) {
                std::size_t rem = i;
                double s = 0.0;
                for (int a = g.d - 1; a >= 0; --a) {
                    const std::size_t k = rem % g.Nx;
                    rem /= g.Nx;
                    const std::size_t half = g.Nx / 2;
                    const double sk = (k <= half) ? double(k) : double(k) - double(g.Nx);
                    const double xi = 2.0 * M_PI * sk / g.Lx;
                    s += xi * xi;
                }
                w[i] *= std::exp(-opt.T * std::pow(std::sqrt(s), p.alpha));
            }
            fft_nd(w, dims, true);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            num += std::abs(evo.rho.back()[i] - w[i].real());
            den += std::abs(w[i].real());
        }
        c.check(num / den <= 1e-3, "b=0 mean-field flow matches the free flow within 1e-3", num / den);
        double worst_mass = 0.0;
        for (double md : evo.mass_drift) worst_mass = std::max(worst_mass, md);
        c.check(worst_mass <= 1e-6, "per-step mass drift <= 1e-6", worst_mass);
    }

    // moment-sign oracle
    {
        mv::MeanFieldOptions opt;
        opt.dt = 2e-3;
        opt.T = 0.2;
        mv::DensityEvolution fr = mv::meanfield_solve(drift::zero_drift(p), h, g, p.alpha, opt);
        mv::DensityEvolution at = mv::meanfield_solve(
            drift::model_drift_radial(0.5, drift::RadialDirection::attracting, p), h, g, p.alpha, opt);
        mv::DensityEvolution re = mv::meanfield_solve(
            drift::model_drift_radial(0.5, drift::RadialDirection::repulsing, p), h, g, p.alpha, opt);
        const double mf = mv::second_moment(g, fr.rho.back());
        const double ma = mv::second_moment(g, at.rho.back());
        const double mr = mv::second_moment(g, re.rho.back());
        c.check(ma < mf && mr > mf, "second-moment signs match attracting/repulsing kernels", ma - mf);
    }

    // propagation of chaos trend over N in {100, 1000, 10000}
    {
        drift::DriftField k = drift::model_drift_radial(0.3, drift::RadialDirection::attracting, p);
        mv::MeanFieldOptions mopt;
        mopt.dt = 5e-3;
        mopt.T = 0.2;
        mv::DensityEvolution evo = mv::meanfield_solve(k, h, g, p.alpha, mopt);
        mv::ParticleOptions popt;
        popt.dt = 5e-3;
        popt.T = 0.2;
        const double smoothing = 0.5;
        // replicate the two cheap sizes to estimate the statistical error
        auto gap_at = [&](std::size_t N, std::uint64_t seed) {
            auto snaps = mv::particle_system_run(k, h, g, p.alpha, N, seed, popt);
            return mv::propagation_gap(snaps.back(), evo, smoothing);
        };
        const double g100 = (gap_at(100, 7) + gap_at(100, 8) + gap_at(100, 9)) / 3.0;
        double se100 = 0.0;
        {
            const double a = gap_at(100, 7), b2 = gap_at(100, 8), c2 = gap_at(100, 9);
            const double m = (a + b2 + c2) / 3.0;
            se100 = std::sqrt(((a - m) * (a - m) + (b2 - m) * (b2 - m) + (c2 - m) * (c2 - m)) / 6.0);
        }
        const double g1000 = (gap_at(1000, 7) + gap_at(1000, 8)) / 2.0;
        const double g10000 = gap_at(10000, 7);
        std::cout << "    gaps: N=100 " << g100 << " (se " << se100 << "), N=1000 " << g1000
                  << ", N=10000 " << g10000 << "\n";
        c.check(g1000 <= g100 + 2.0 * se100 && g10000 <= g1000 + 2.0 * se100,
                "propagation gap non-increasing over N in {100, 1000, 10000}", g10000);
    }

    // Young inequality for Morrey norms + a priori bounds
    {
        drift::DriftField k = drift::model_drift_radial(0.1, drift::RadialDirection::attracting, p);
        mv::MeanFieldOptions opt;
        opt.dt = 2e-3;
        opt.T = 0.4;
        opt.lambda = 2.0;
        mv::DensityEvolution evo = mv::meanfield_solve(k, h, g, p.alpha, opt);
        morrey::ScalarField w = morrey::drift_power_field(k, 2.0);
        morrey::SamplingPlan plan = morrey::SamplingPlan::standard(w, 2, -6, 6);
        morrey::MorreyReport rhs = morrey::elliptic_morrey_norm(w, 1.1, plan, p.alpha);
        mv::YoungMorreyReport ym = mv::young_morrey_check(k, evo, 0.1, p.alpha, rhs);
        c.check(ym.holds_on_all_cylinders, "Young-for-Morrey inequality holds on every sampled cylinder",
                ym.lhs / std::max(ym.rhs, 1e-300));

        const double pp = 2.0;
        mv::AprioriReport rep = mv::apriori_bound_check(evo, pp, 1.8, p.alpha, 64);
        // refinement stability of the a priori ratio: finer spatial grid
        mv::SpatialGrid g2 = g;
        g2.Nx = 128;
        mv::DensityEvolution evo2 = mv::meanfield_solve(k, h, g2, p.alpha, opt);
        mv::AprioriReport rep2 = mv::apriori_bound_check(evo2, pp, 1.8, p.alpha, 64);
        const double stab = rep2.ratio_delta / rep.ratio_delta;
        c.check(std::isfinite(rep.ratio_delta) && stab <= 2.0 && stab >= 0.5,
                "a priori ratio stable within 2x under refinement", stab);
        // blow-up of the r-dependent constant toward r = d p/(d+1)
        const double far = mv::apriori_time_constant(pp, 1.9, p.alpha, 2, opt.lambda);
        const double near = mv::apriori_time_constant(pp, 1.3404, p.alpha, 2, opt.lambda);
        c.check(near > 10.0 * far, "RHS constant blows up as r approaches d p/(d+1)", near / far);
    }
    return c.ok();
}

// ---------------------------------------------------------------------- C9
bool criterion9() {
    Checker c;
    using harness::ExperimentConfig;
    using nlohmann::json;
    const fs::path dir = fs::temp_directory_path() / "fraclab_acceptance_repro";
    fs::remove_all(dir);
    json cfg{{"params", {{"alpha", 1.5}, {"d", 2}, {"lambda", 5.0}}},
             {"grid", {{"Lt", 4.0}, {"Lx", 16.0}, {"Nt", 16}, {"Nx", 16}}},
             {"seed", 2718},
             {"output_dir", dir.string()},
             {"experiments",
              json::array({json{{"type", "kernel"}, {"gamma", 2.0}, {"tmin", 0.2}, {"tmax", 1.0}, {"xmax", 3.0}, {"grid_n", 5}},
                           json{{"type", "sde"},
                                {"drift", json{{"type", "bump"}, {"amplitude", 0.4}, {"radius", 1.5}}},
                                {"n_cutoff", 4},
                                {"T", 0.05},
                                {"dt", 0.01},
                                {"paths", 500},
                                {"seed", 5}},
                           json{{"type", "solve"},
                                {"drift", json{{"type", "radial"}, {"kappa", 0.05}}},
                                {"p", 2.0},
                                {"lambda", 5.0}}})}};
    auto hashes = [&]() {
        const fs::path manifest = harness::run_experiment(ExperimentConfig::parse(cfg, dir));
        std::ifstream in(manifest);
        return json::parse(in);
    };
    json m1 = hashes();
    json m2 = hashes(); // same directory, same config and seed
    bool same = m1 == m2;
    c.check(same, "rerun with identical config and seed is byte-identical");
    fs::remove_all(dir);
    return c.ok();
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

    struct Item {
        int id;
        const char* name;
        bool (*run)();
    };
    const std::vector<Item> items{{1, "kernel validity", criterion1},
                                  {2, "Morrey machinery", criterion2},
                                  {3, "operator inequality", criterion3},
                                  {4, "operator engine", criterion4},
                                  {5, "series solver", criterion5},
                                  {6, "evolution family", criterion6},
                                  {7, "stable SDE", criterion7},
                                  {8, "McKean-Vlasov", criterion8},
                                  {9, "reproducibility", criterion9}};
    bool all_ok = true;
    for (const auto& item : items) {
        if (only != 0 && item.id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        std::cout << "CRITERION " << item.id << " (" << item.name << ")\n";
        bool ok = false;
        try {
            ok = item.run();
        } catch (const std::exception& e) {
            std::cout << "  [FAIL] unexpected exception: " << e.what() << "\n";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "CRITERION " << item.id << ": " << (ok ? "PASS" : "FAIL") << "  ["
                  << secs << " s]\n";
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}

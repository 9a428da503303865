#include <doctest.h>

#include <array>
#include <cmath>

#include "fraclab/sde.hpp"
#include "fraclab/solver.hpp"

using namespace fraclab;

TEST_SUITE_BEGIN("sde");

TEST_CASE("increment characteristic function matches the symbol") {
    const double dt = 0.01;
    std::vector<double> freqs{0.5, 1.0, 2.0, 4.0, 7.0};
    for (double alpha : {1.5, 1.2}) {
        StableParams p(alpha, 2, 0.0);
        auto cf = sde::increment_cf_check(dt, p, freqs, 200000, 42);
        for (const auto& pt : cf) {
            CHECK(std::abs(pt.empirical - pt.exact) <= 3.0 * pt.std_error);
            CHECK(pt.std_error < 0.01);
        }
    }
    // alpha = 2 falls back to an exact Gaussian
    StableParams p2(2.0, 2, 0.0);
    auto cf2 = sde::increment_cf_check(dt, p2, freqs, 100000, 43);
    for (const auto& pt : cf2) CHECK(std::abs(pt.empirical - pt.exact) <= 3.0 * pt.std_error);
}

TEST_CASE("one-sided stable subordinator has the right Laplace transform") {
    // E[e^{-u S}] = e^{-u^a}: Monte Carlo check at a few u
    RandomStream rng(7);
    const double a = 0.75; // alpha = 1.5
    const std::size_t n = 200000;
    for (double u : {0.5, 1.0, 2.0}) {
        double s = 0.0, s2 = 0.0;
        RandomStream r2(7);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::exp(-u * sde::sample_one_sided_stable(a, r2));
            s += v;
            s2 += v * v;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        CHECK(std::abs(mean - std::exp(-std::pow(u, a))) <= 3.5 * se);
    }
    (void)rng;
}

TEST_CASE("stable scaling: Z_{ct} equals c^{1/alpha} Z_t in law") {
    StableParams p(1.5, 2, 0.0);
    const double dt = 0.02, c = 3.0;
    std::vector<double> freqs{1.0, 2.5};
    auto big = sde::increment_cf_check(c * dt, p, freqs, 150000, 11);
    // CF of c^{1/alpha} Z_dt at xi equals CF of Z_dt at c^{1/alpha} xi
    std::vector<double> scaled{freqs[0] * std::pow(c, 1.0 / 1.5), freqs[1] * std::pow(c, 1.0 / 1.5)};
    auto small = sde::increment_cf_check(dt, p, scaled, 150000, 12);
    for (std::size_t i = 0; i < freqs.size(); ++i)
        CHECK(std::abs(big[i].empirical - small[i].empirical) <=
              3.0 * (big[i].std_error + small[i].std_error));
}

TEST_CASE("isotropy: empirical mean increment is statistically zero") {
    StableParams p(1.5, 2, 0.0);
    RandomStream rng(99);
    std::array<double, 3> z{};
    double m1 = 0.0, m2 = 0.0, v1 = 0.0, v2 = 0.0;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) {
        sde::sample_stable_increment(0.01, p, rng, std::span<double>(z.data(), 2));
        m1 += z[0];
        m2 += z[1];
        v1 += z[0] * z[0];
        v2 += z[1] * z[1];
    }
    m1 /= n;
    m2 /= n;
    CHECK(std::abs(m1) <= 3.0 * std::sqrt(v1 / n) / std::sqrt(double(n)));
    CHECK(std::abs(m2) <= 3.0 * std::sqrt(v2 / n) / std::sqrt(double(n)));
}

TEST_CASE("euler-maruyama basics: rejection, determinism, constant drift") {
    StableParams p(1.5, 2, 0.0);
    drift::DriftField raw = drift::model_drift_radial(0.1, drift::RadialDirection::attracting, p);
    std::array<double, 2> x0{0.0, 0.0};
    CHECK_THROWS_AS(sde::euler_maruyama(raw, x0, 0.1, 1e-2, 10, 1, p), UnboundedDrift);

    drift::DriftField c = drift::constant_drift({0.8, -0.4}, p);
    sde::PathEnsemble e1 = sde::euler_maruyama(c, x0, 0.5, 1e-3, 20000, 777, p);
    sde::PathEnsemble e2 = sde::euler_maruyama(c, x0, 0.5, 1e-3, 20000, 777, p);
    CHECK(e1.terminal == e2.terminal); // bitwise reproducible
    CHECK(e1.stored == e2.stored);

    // E[X_T] = x0 - c T within 3 SE per coordinate
    double mx = 0.0, my = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < e1.num_paths; ++i) {
        mx += e1.terminal[2 * i];
        my += e1.terminal[2 * i + 1];
    }
    mx /= e1.num_paths;
    my /= e1.num_paths;
    for (std::size_t i = 0; i < e1.num_paths; ++i) {
        vx += (e1.terminal[2 * i] - mx) * (e1.terminal[2 * i] - mx);
        vy += (e1.terminal[2 * i + 1] - my) * (e1.terminal[2 * i + 1] - my);
    }
    const double sex = std::sqrt(vx / e1.num_paths / e1.num_paths);
    const double sey = std::sqrt(vy / e1.num_paths / e1.num_paths);
    CHECK(std::abs(mx - (-0.8 * 0.5)) <= 3.0 * sex);
    CHECK(std::abs(my - (0.4 * 0.5)) <= 3.0 * sey);
}

TEST_CASE("weak dt-refinement trend for a bounded smooth drift") {
    StableParams p(1.5, 2, 0.0);
    drift::DriftField b = drift::smooth_bump_drift(1.5, 1.5, p);
    std::array<double, 2> x0{0.5, 0.0};
    auto mean_g = [&](double dt, std::uint64_t seed) {
        sde::PathEnsemble e = sde::euler_maruyama(b, x0, 0.5, dt, 40000, seed, p);
        double s = 0.0;
        for (std::size_t i = 0; i < e.num_paths; ++i) {
            const double r2 = e.terminal[2 * i] * e.terminal[2 * i] +
                              e.terminal[2 * i + 1] * e.terminal[2 * i + 1];
            s += std::exp(-r2);
        }
        return s / e.num_paths;
    };
    const double g1 = mean_g(0.1, 5);
    const double g2 = mean_g(0.05, 5);
    const double g4 = mean_g(0.0125, 5);
    const double g8 = mean_g(0.00625, 5);
    // first-order weak error: coarse-step gaps dominate fine-step gaps
    CHECK(std::abs(g1 - g2) > std::abs(g4 - g8) - 5e-3);
}

TEST_CASE("feynman-kac against the evolution family (free flow)") {
    StableParams p(1.5, 2, 5.0);
    BoxGrid g(2.0, 16.0, 16, 32, 2);
    FieldOnGrid g0 = FieldOnGrid::sample_spatial(g, [](std::span<const double> x) {
        return std::exp(-(x[0] * x[0] + x[1] * x[1]));
    });
    solver::SolveOptions opt;
    opt.p = 4.0;
    opt.lambda = 5.0;
    opt.estimate_contraction = false;
    opt.compute_residual = false;
    drift::DriftField z = drift::zero_drift(p);
    solver::EvolveResult ev = solver::evolve(g0, 0.0, z, opt);
    const double r = 0.5;
    const std::size_t ir = static_cast<std::size_t>(r / g.dt());
    const std::size_t sp = g.space_size();
    const double pde = ev.v.values()[ir * sp + (g.Nx / 2) * g.Nx + g.Nx / 2];

    std::array<double, 2> x0{0.0, 0.0};
    sde::PathEnsemble e = sde::euler_maruyama(z, x0, r, 1e-3, 40000, 2024, p, 0.5 * g.Lx);
    sde::FKResult fk = sde::feynman_kac_check(
        e, [](std::span<const double> x) { return std::exp(-(x[0] * x[0] + x[1] * x[1])); }, r,
        opt.lambda, pde);
    CHECK(fk.discrepancy <= 3.0 * fk.mc_se + 2e-2 * std::abs(pde) + 1e-4);
}

TEST_CASE("krylov occupation bounds") {
    StableParams p(1.5, 2, 5.0);
    drift::DriftField braw = drift::model_drift_radial(0.05, drift::RadialDirection::attracting, p);
    drift::DriftField bn = drift::cutoff_mollify(braw, drift::CutoffSpec{8, 0.0});
    const double t = 0.5, pp = 4.0;
    std::array<double, 2> x0{0.0, 0.0};
    sde::MCSpec spec;
    spec.num_paths = 8000;
    spec.dt = 2e-3;
    spec.seed = 31;

    // PDE-side bound from the backward solve with |F| as forcing
    BoxGrid g(2.0, 16.0, 16, 32, 2);
    auto bump = [](double, std::span<const double> x) {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        return std::exp(-r2);
    };
    solver::SolveOptions opt;
    opt.lambda = 5.0;
    opt.estimate_contraction = false;
    opt.compute_residual = false;
    FieldOnGrid F = FieldOnGrid::sample(g, bump);
    FieldOnGrid w = solver::terminal_value_solve(F, t, bn, opt);

    sde::OccupationTarget zero{"zero", [](double, std::span<const double>) { return 0.0; }, 1.0, -1.0};
    sde::OccupationTarget tgt{"bump", bump, t * M_PI, w.max_abs()};
    sde::OccupationTarget tgt10{"bump10",
                                [&](double s, std::span<const double> x) { return 10.0 * bump(s, x); },
                                10.0 * t * M_PI, -1.0};
    auto reports = sde::krylov_bound_check(bn, {zero, tgt, tgt10}, pp, t, x0, spec, p);
    CHECK(reports[0].lhs == 0.0);
    CHECK(reports[1].lhs > 0.0);
    CHECK(reports[1].within_pde_bound);
    // scaling F by 10 scales the L1 side by 10^{1/p}
    CHECK(reports[2].rhs == doctest::Approx(std::pow(10.0, 1.0 / pp) * reports[1].rhs).epsilon(1e-12));
    CHECK(reports[2].lhs == doctest::Approx(10.0 * reports[1].lhs).epsilon(1e-9));
}

TEST_CASE("mass check flags strong outward drift") {
    StableParams p(1.5, 2, 0.0);
    std::array<double, 2> x0{0.0, 0.0};
    drift::DriftField quiet = drift::constant_drift({0.0, 0.0}, p);
    sde::PathEnsemble calm = sde::euler_maruyama(quiet, x0, 0.2, 1e-2, 2000, 3, p, 1e6);
    CHECK(sde::mass_check(calm).escape_fraction == 0.0);
    CHECK(!sde::mass_check(calm).warning);

    drift::DriftField out = drift::constant_drift({50.0, 0.0}, p); // race out of the box
    sde::PathEnsemble wild = sde::euler_maruyama(out, x0, 0.2, 1e-2, 2000, 3, p, 2.0);
    CHECK(sde::mass_check(wild).warning);
}

TEST_SUITE_END();

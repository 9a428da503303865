#include "fraclab/sde.hpp"

#include <array>
#include <cmath>

#include "fraclab/parallel.hpp"

namespace fraclab {
namespace sde {

double sample_one_sided_stable(double a, RandomStream& rng) {
    // Kanter's representation: S = [sin(aU)/sin(U)^{1/a}] [sin((1-a)U)/E]^{(1-a)/a}
    const double U = M_PI * rng.uniform();
    const double E = rng.exponential();
    const double s1 = std::sin(a * U) / std::pow(std::sin(U), 1.0 / a);
    const double s2 = std::pow(std::sin((1.0 - a) * U) / E, (1.0 - a) / a);
    return s1 * s2;
}

void sample_stable_increment(double dt, const StableParams& p, RandomStream& rng,
                             std::span<double> out) {
    if (!(dt > 0.0)) throw ConfigError("sample_stable_increment: dt must be > 0");
    if (p.alpha == 2.0) {
        const double s = std::sqrt(2.0 * dt);
        for (int i = 0; i < p.d; ++i) out[i] = s * rng.gaussian();
        return;
    }
    const double a = 0.5 * p.alpha;
    const double S = std::pow(dt, 2.0 / p.alpha) * sample_one_sided_stable(a, rng);
    const double s = std::sqrt(2.0 * S);
    for (int i = 0; i < p.d; ++i) out[i] = s * rng.gaussian();
}

PathEnsemble euler_maruyama(const drift::DriftField& b_n, std::span<const double> x0, double T,
                            double dt, std::size_t num_paths, std::uint64_t seed,
                            const StableParams& params, double box_half, std::size_t store_limit) {
    if (!b_n.smooth_and_bounded)
        throw UnboundedDrift("euler_maruyama: drift must be a bounded cutoff field (pass a "
                             "cutoff_mollify output)");
    if (static_cast<int>(x0.size()) != params.d || b_n.d != params.d)
        throw ConfigError("euler_maruyama: dimension mismatch");

    PathEnsemble e;
    e.d = params.d;
    e.dt = dt;
    e.T = T;
    e.num_paths = num_paths;
    e.seed = seed;
    e.drift_id = b_n.id;
    e.box_half = box_half;
    const std::size_t steps = e.steps();
    e.terminal.assign(num_paths * params.d, 0.0);
    e.stored_count = std::min(store_limit, num_paths);
    e.stored.assign(e.stored_count * (steps + 1) * params.d, 0.0);

    std::vector<std::uint8_t> escaped_flags(num_paths, 0);
    parallel_for(num_paths, [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        std::array<double, 3> bval{};
        std::array<double, 3> dz{};
        for (std::size_t path = lo; path < hi; ++path) {
            RandomStream rng = RandomStream::substream(seed, path);
            for (int i = 0; i < params.d; ++i) x[i] = x0[i];
            bool out_of_box = false;
            if (path < e.stored_count)
                for (int i = 0; i < params.d; ++i) e.stored[(path * (steps + 1)) * params.d + i] = x[i];
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = dt * static_cast<double>(k);
                b_n.eval(t, std::span<const double>(x.data(), params.d),
                         std::span<double>(bval.data(), params.d));
                sample_stable_increment(dt, params, rng, std::span<double>(dz.data(), params.d));
                for (int i = 0; i < params.d; ++i) x[i] += -bval[i] * dt + dz[i];
                for (int i = 0; i < params.d; ++i)
                    if (std::abs(x[i]) > box_half) out_of_box = true;
                if (path < e.stored_count)
                    for (int i = 0; i < params.d; ++i)
                        e.stored[(path * (steps + 1) + k + 1) * params.d + i] = x[i];
            }
            for (int i = 0; i < params.d; ++i) e.terminal[path * params.d + i] = x[i];
            escaped_flags[path] = out_of_box ? 1 : 0;
        }
    }, 64);
    for (auto f : escaped_flags) e.escaped += f;
    return e;
}

std::vector<CFPoint> increment_cf_check(double dt, const StableParams& p,
                                        std::span<const double> freqs, std::size_t draws,
                                        std::uint64_t seed) {
    std::vector<CFPoint> out(freqs.size());
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        out[j].freq = freqs[j];
        out[j].exact = std::exp(-dt * std::pow(freqs[j], p.alpha));
    }
    // chunked accumulation in fixed order; xi aligned with the first axis
    // (isotropy is exact by construction)
    const std::size_t chunk = 16384;
    const std::size_t chunks = (draws + chunk - 1) / chunk;
    std::vector<std::vector<double>> sums(chunks, std::vector<double>(2 * freqs.size(), 0.0));
    parallel_for(chunks, [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> z{};
        for (std::size_t c = lo; c < hi; ++c) {
            RandomStream rng = RandomStream::substream(seed ^ 0xCF5EED, c);
            const std::size_t n = std::min(chunk, draws - c * chunk);
            for (std::size_t i = 0; i < n; ++i) {
                sample_stable_increment(dt, p, rng, std::span<double>(z.data(), p.d));
                for (std::size_t j = 0; j < freqs.size(); ++j) {
                    const double cv = std::cos(freqs[j] * z[0]);
                    sums[c][2 * j] += cv;
                    sums[c][2 * j + 1] += cv * cv;
                }
            }
        }
    }, 1);
    for (std::size_t j = 0; j < freqs.size(); ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            s += sums[c][2 * j];
            s2 += sums[c][2 * j + 1];
        }
        const double n = static_cast<double>(draws);
        const double mean = s / n;
        const double var = std::max(s2 / n - mean * mean, 0.0);
        out[j].empirical = mean;
        out[j].std_error = std::sqrt(var / n);
    }
    return out;
}

FKResult feynman_kac_check(const PathEnsemble& e,
                           const std::function<double(std::span<const double>)>& g, double r,
                           double lambda, double pde_value) {
    if (std::abs(e.T - r) > 0.5 * e.dt)
        throw ConfigError("feynman_kac_check: ensemble horizon must equal the evaluation time r");
    double s = 0.0, s2 = 0.0;
    for (std::size_t path = 0; path < e.num_paths; ++path) {
        const double v = g(std::span<const double>(e.terminal.data() + path * e.d, e.d));
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(e.num_paths);
    const double damp = std::exp(-lambda * r);
    FKResult out;
    out.mc_mean = damp * s / n;
    const double var = std::max(s2 / n - (s / n) * (s / n), 0.0);
    out.mc_se = damp * std::sqrt(var / n);
    out.pde_value = pde_value;
    out.discrepancy = std::abs(out.mc_mean - pde_value);
    return out;
}

std::vector<KrylovReport> krylov_bound_check(const drift::DriftField& b_n,
                                             std::vector<OccupationTarget> targets, double p,
                                             double t, std::span<const double> x0,
                                             const MCSpec& spec, const StableParams& params) {
    if (!b_n.smooth_and_bounded)
        throw UnboundedDrift("krylov_bound_check: drift must be a bounded cutoff field");
    const std::size_t steps = static_cast<std::size_t>(std::llround(t / spec.dt));
    const std::size_t nf = targets.size();
    // per-path occupation integrals, accumulated in one sweep
    std::vector<double> occ(spec.num_paths * nf, 0.0);
    parallel_for(spec.num_paths, [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        std::array<double, 3> bval{};
        std::array<double, 3> dz{};
        for (std::size_t path = lo; path < hi; ++path) {
            RandomStream rng = RandomStream::substream(spec.seed, path);
            for (int i = 0; i < params.d; ++i) x[i] = x0[i];
            for (std::size_t k = 0; k < steps; ++k) {
                const double tk = spec.dt * static_cast<double>(k);
                const std::span<const double> xs(x.data(), params.d);
                for (std::size_t j = 0; j < nf; ++j)
                    occ[path * nf + j] += std::abs(targets[j].eval(tk, xs)) * spec.dt;
                b_n.eval(tk, xs, std::span<double>(bval.data(), params.d));
                sample_stable_increment(spec.dt, params, rng, std::span<double>(dz.data(), params.d));
                for (int i = 0; i < params.d; ++i) x[i] += -bval[i] * spec.dt + dz[i];
            }
        }
    }, 32);

    std::vector<KrylovReport> reports(nf);
    for (std::size_t j = 0; j < nf; ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t path = 0; path < spec.num_paths; ++path) {
            const double v = occ[path * nf + j];
            s += v;
            s2 += v * v;
        }
        const double n = static_cast<double>(spec.num_paths);
        KrylovReport& r = reports[j];
        r.F_id = targets[j].id;
        r.lhs = s / n;
        r.lhs_se = std::sqrt(std::max(s2 / n - r.lhs * r.lhs, 0.0) / n);
        r.rhs = std::pow(targets[j].l1_norm, 1.0 / p);
        r.fitted_C = (r.rhs > 0.0) ? r.lhs / r.rhs : 0.0;
        r.pde_bound = targets[j].pde_bound;
        r.within_pde_bound =
            (r.pde_bound < 0.0) || (r.lhs <= r.pde_bound + 3.0 * r.lhs_se + 1e-12);
    }
    return reports;
}

MassReport mass_check(const PathEnsemble& e, double threshold) {
    MassReport r;
    r.escape_fraction = e.num_paths ? static_cast<double>(e.escaped) / e.num_paths : 0.0;
    r.warning = r.escape_fraction >= threshold;
    return r;
}

} // namespace sde
} // namespace fraclab

#include "fraclab/mckean_vlasov.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "fraclab/fft.hpp"
#include "fraclab/numerics.hpp"
#include "fraclab/parallel.hpp"
#include "fraclab/rng.hpp"
#include "fraclab/sde.hpp"

namespace fraclab {
namespace mv {

namespace {

std::vector<std::size_t> space_dims(const SpatialGrid& g) {
    return std::vector<std::size_t>(g.d, g.Nx);
}

void coords_of(const SpatialGrid& g, std::size_t idx, std::span<double> x) {
    for (int a = g.d - 1; a >= 0; --a) {
        x[a] = g.coord_at(idx % g.Nx);
        idx /= g.Nx;
    }
}

double xi_component(const SpatialGrid& g, std::size_t k) {
    const std::size_t half = g.Nx / 2;
    const double signed_k = (k <= half) ? static_cast<double>(k)
                                        : static_cast<double>(k) - static_cast<double>(g.Nx);
    return 2.0 * M_PI * signed_k / g.Lx;
}

double xi_abs(const SpatialGrid& g, std::size_t idx) {
    double s = 0.0;
    for (int a = g.d - 1; a >= 0; --a) {
        const double c = xi_component(g, idx % g.Nx);
        s += c * c;
        idx /= g.Nx;
    }
    return std::sqrt(s);
}

// sample an interaction kernel on the displacement lattice (index k encodes
// the displacement k*h for k < N/2 and (k-N)*h beyond, matching the DFT
// convolution alignment), averaging the cells that touch its singular loci
std::vector<double> sample_kernel(const drift::DriftField& b, const SpatialGrid& g) {
    std::vector<double> out(g.size() * g.d, 0.0);
    const double hx = g.dx();
    auto displacement_of = [&](std::size_t idx, std::span<double> x) {
        for (int a = g.d - 1; a >= 0; --a) {
            const std::size_t k = idx % g.Nx;
            idx /= g.Nx;
            const double sk = (k < g.Nx / 2) ? static_cast<double>(k)
                                             : static_cast<double>(k) - static_cast<double>(g.Nx);
            x[a] = sk * hx;
        }
    };
    parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        std::array<double, 3> v{};
        for (std::size_t idx = lo; idx < hi; ++idx) {
            displacement_of(idx, std::span<double>(x.data(), g.d));
            bool near = false;
            for (const auto& pl : b.point_loci) {
                double m = 0.0;
                for (int i = 0; i < g.d; ++i) m = std::max(m, std::abs(x[i] - pl.x[i]));
                near = near || m <= 1.5 * hx;
            }
            for (const auto& al : b.axis_loci) near = near || std::abs(x[al.axis] - al.offset) <= 1.5 * hx;
            if (!near) {
                b.eval(0.0, std::span<const double>(x.data(), g.d), std::span<double>(v.data(), g.d));
            } else {
                static const std::array<double, 5> off{-0.4, -0.2, 0.0, 0.2, 0.4};
                std::array<double, 3> acc{};
                std::array<double, 3> y{};
                std::array<double, 3> buf{};
                int count = 0;
                const int total = static_cast<int>(std::pow(5, g.d));
                for (int flat = 0; flat < total; ++flat) {
                    int rem = flat;
                    for (int a = 0; a < g.d; ++a) {
                        y[a] = x[a] + hx * off[rem % 5];
                        rem /= 5;
                    }
                    b.eval(0.0, std::span<const double>(y.data(), g.d),
                           std::span<double>(buf.data(), g.d));
                    for (int a = 0; a < g.d; ++a) acc[a] += buf[a];
                    ++count;
                }
                for (int a = 0; a < g.d; ++a) v[a] = acc[a] / count;
            }
            for (int a = 0; a < g.d; ++a) out[idx * g.d + a] = v[a];
        }
    }, 256);
    return out;
}

} // namespace

double second_moment(const SpatialGrid& g, std::span<const double> rho) {
    KahanSum s;
    std::array<double, 3> x{};
    for (std::size_t i = 0; i < rho.size(); ++i) {
        coords_of(g, i, std::span<double>(x.data(), g.d));
        double r2 = 0.0;
        for (int a = 0; a < g.d; ++a) r2 += x[a] * x[a];
        s.add(rho[i] * r2);
    }
    return s.value() * g.cell_volume();
}

DensityEvolution meanfield_solve(const drift::DriftField& b_kernel,
                                 const std::function<double(std::span<const double>)>& h,
                                 const SpatialGrid& grid, double alpha,
                                 const MeanFieldOptions& opt) {
    const std::size_t n = grid.size();
    const auto dims = space_dims(grid);
    const double vol = grid.cell_volume();

    DensityEvolution evo;
    evo.grid = grid;
    evo.dt = opt.dt;
    evo.T = opt.T;
    evo.lambda = opt.lambda;

    std::vector<double> rho(n, 0.0);
    {
        std::array<double, 3> x{};
        for (std::size_t i = 0; i < n; ++i) {
            coords_of(grid, i, std::span<double>(x.data(), grid.d));
            rho[i] = std::max(h(std::span<const double>(x.data(), grid.d)), 0.0);
        }
        double mass = std::accumulate(rho.begin(), rho.end(), 0.0) * vol;
        if (!(mass > 0.0)) throw ConfigError("meanfield_solve: initial density has zero mass");
        for (double& v : rho) v /= mass;
    }

    // spectral tables
    std::vector<double> kernel = sample_kernel(b_kernel, grid);
    std::vector<std::vector<cplx>> bhat(grid.d, std::vector<cplx>(n));
    for (int a = 0; a < grid.d; ++a) {
        for (std::size_t i = 0; i < n; ++i) bhat[a][i] = cplx(kernel[i * grid.d + a], 0.0);
        fft_nd(bhat[a], dims, false);
    }
    std::vector<double> sym(n);
    for (std::size_t i = 0; i < n; ++i) sym[i] = std::pow(xi_abs(grid, i), alpha);

    const std::size_t steps = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
    evo.rho.push_back(rho);
    std::vector<cplx> work(n), conv(n), flux(n);
    for (std::size_t k = 0; k < steps; ++k) {
        // convolution b * rho, one component at a time
        for (std::size_t i = 0; i < n; ++i) work[i] = cplx(rho[i], 0.0);
        fft_nd(work, dims, false);
        std::vector<double> conv_phys(n * grid.d);
        double max_speed = 0.0;
        for (int a = 0; a < grid.d; ++a) {
            for (std::size_t i = 0; i < n; ++i) conv[i] = work[i] * bhat[a][i] * vol;
            fft_nd(conv, dims, true);
            for (std::size_t i = 0; i < n; ++i) conv_phys[i * grid.d + a] = conv[i].real();
        }
        for (std::size_t i = 0; i < n; ++i) {
            double m = 0.0;
            for (int a = 0; a < grid.d; ++a) m += conv_phys[i * grid.d + a] * conv_phys[i * grid.d + a];
            max_speed = std::max(max_speed, m);
        }
        max_speed = std::sqrt(max_speed);
        if (max_speed * opt.dt / grid.dx() > opt.cfl_limit)
            throw StepRejection("meanfield_solve: transport CFL exceeded",
                                opt.cfl_limit * grid.dx() / std::max(max_speed, 1e-300));

        // explicit divergence of (b*rho) rho, spectral derivative per axis
        std::vector<double> divflux(n, 0.0);
        for (int a = 0; a < grid.d; ++a) {
            for (std::size_t i = 0; i < n; ++i)
                flux[i] = cplx(conv_phys[i * grid.d + a] * rho[i], 0.0);
            fft_nd(flux, dims, false);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t rem = i;
                for (int bb = grid.d - 1; bb > a; --bb) rem /= grid.Nx;
                std::size_t kx = rem % grid.Nx;
                const std::size_t half = grid.Nx / 2;
                const double signed_k = (kx < half) ? static_cast<double>(kx)
                                     : (kx == half) ? 0.0
                                                    : static_cast<double>(kx) - static_cast<double>(grid.Nx);
                flux[i] *= cplx(0.0, 2.0 * M_PI * signed_k / grid.Lx);
            }
            fft_nd(flux, dims, true);
            for (std::size_t i = 0; i < n; ++i) divflux[i] += flux[i].real();
        }

        // semi-implicit update
        for (std::size_t i = 0; i < n; ++i) work[i] = cplx(rho[i] + opt.dt * divflux[i], 0.0);
        fft_nd(work, dims, false);
        for (std::size_t i = 0; i < n; ++i) work[i] /= (1.0 + opt.dt * sym[i]);
        fft_nd(work, dims, true);

        double minv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rho[i] = work[i].real();
            minv = std::min(minv, rho[i]);
        }
        evo.min_value.push_back(minv);
        if (minv < opt.negativity_floor) {
            // clip and continue; the floor is reported, not asserted
            for (double& v : rho) v = std::max(v, 0.0);
        } else {
            for (double& v : rho) v = std::max(v, 0.0);
        }
        const double mass = std::accumulate(rho.begin(), rho.end(), 0.0) * vol;
        evo.mass_drift.push_back(std::abs(mass - 1.0));
        if (mass > 0.0)
            for (double& v : rho) v /= mass;
        evo.rho.push_back(rho);
        if (opt.store_convolutions) evo.conv_drift.push_back(std::move(conv_phys));
    }
    return evo;
}

ForwardResult forward_kolmogorov_solve(const drift::DriftField& b, const FieldOnGrid& h_spatial,
                                       const solver::SolveOptions& opt) {
    const BoxGrid& g = h_spatial.grid();
    spectral::SymbolPower base;
    base.lambda = opt.lambda;
    base.alpha = b.alpha;

    const double p = opt.p;
    const double pprime = p / (p - 1.0);
    const double sigma1 = 1.0 / pprime + 1.0 / (b.alpha * p); // gamma1/2
    const double sigma2 = 1.0 / p + 1.0 / (b.alpha * pprime);

    spectral::DriftOnGrid bg = spectral::sample_for_p(b, g, p);
    spectral::LinOp Q = spectral::make_Qp(bg, base);
    auto Rt = spectral::make_Rp_transpose(bg, base);

    // X = A^{-sigma1} delta_0 h, then the all-plus Duhamel series
    FieldOnGrid X = spectral::delta_resolvent(h_spatial, 0.0, 2.0 * sigma1, base);
    VectorFieldOnGrid inc = spectral::apply_Gp(b, p, base, X);
    VectorFieldOnGrid sum = inc;

    ForwardResult out;
    double prev = inc.lp_norm(p);
    out.series_terms = 1;
    for (int k = 1; k <= opt.max_terms && prev > 0.0; ++k) {
        VectorFieldOnGrid qv(g);
        for (int a = 0; a < g.d; ++a) qv.comps[a] = Q.apply(inc.comps[a]);
        inc = Rt(qv);
        const double n = inc.lp_norm(p);
        const double ratio = n / prev;
        out.last_ratio = ratio;
        for (int a = 0; a < g.d; ++a) sum.comps[a] += inc.comps[a];
        out.series_terms = k + 1;
        if (n <= opt.tol * std::max(sum.lp_norm(p), 1e-300)) break;
        if (k >= opt.contraction_window && ratio >= 1.0)
            throw NoContraction("forward_kolmogorov_solve: increments stopped decaying");
        prev = n;
        if (k == opt.max_terms)
            throw NoContraction("forward_kolmogorov_solve: series did not converge");
    }

    VectorFieldOnGrid qs(g);
    for (int a = 0; a < g.d; ++a) qs.comps[a] = Q.apply(sum.comps[a]);
    spectral::SymbolPower pw = base;
    pw.gamma = 2.0 * sigma2; // A^{-sigma2}
    VectorFieldOnGrid smooth = spectral::apply_bessel_power(qs, pw);
    FieldOnGrid corr = spectral::apply_divergence(smooth);

    out.eta = spectral::delta_resolvent(h_spatial, 0.0, 2.0, base) + corr;
    const double gplus = (2.0 / p) * (1.0 - 1.0 / b.alpha);
    out.lhs_norm = spectral::bessel_norm(out.eta, gplus, p, opt.lambda, b.alpha);
    out.rhs_norm = X.lp_norm(p);
    out.constant = out.lhs_norm / std::max(out.rhs_norm, 1e-300);
    double mn = 0.0;
    for (double v : out.eta.values()) mn = std::min(mn, v);
    out.min_value = mn;
    return out;
}

std::vector<ParticleState> particle_system_run(
    const drift::DriftField& b_kernel, const std::function<double(std::span<const double>)>& h,
    const SpatialGrid& sampling_grid, double alpha, std::size_t N, std::uint64_t seed,
    const ParticleOptions& opt) {
    const int d = sampling_grid.d;
    StableParams params(alpha, d, 0.0);
    const double trunc = opt.kernel_trunc >= 0.0 ? opt.kernel_trunc : sampling_grid.dx();

    // envelope rejection sampling of the initial positions from h
    double h_sup = 0.0;
    {
        std::array<double, 3> x{};
        for (std::size_t i = 0; i < sampling_grid.size(); ++i) {
            coords_of(sampling_grid, i, std::span<double>(x.data(), d));
            h_sup = std::max(h_sup, h(std::span<const double>(x.data(), d)));
        }
        h_sup *= 1.25;
    }
    ParticleState st;
    st.N = N;
    st.d = d;
    st.seed = seed;
    st.kernel_trunc = trunc;
    st.positions.assign(N * d, 0.0);
    parallel_for(N, [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        for (std::size_t i = lo; i < hi; ++i) {
            RandomStream rng = RandomStream::substream(seed ^ 0x1237, i);
            for (int tries = 0; tries < 100000; ++tries) {
                for (int a = 0; a < d; ++a)
                    x[a] = rng.uniform(-0.5 * sampling_grid.Lx, 0.5 * sampling_grid.Lx);
                const double u = rng.uniform(0.0, h_sup);
                if (u <= h(std::span<const double>(x.data(), d))) break;
            }
            for (int a = 0; a < d; ++a) st.positions[i * d + a] = x[a];
        }
    }, 64);

    const std::size_t steps = static_cast<std::size_t>(std::llround(opt.T / opt.dt));
    std::vector<ParticleState> snaps;
    snaps.push_back(st);

    std::vector<double> forces(N * d, 0.0);
    std::vector<double> next(N * d, 0.0);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto& pos = st.positions;
        // pairwise sweep: forces[i] = (1/N) sum_j b(X_i - X_j)
        parallel_for(N, [&](std::size_t lo, std::size_t hi) {
            std::array<double, 3> diff{};
            std::array<double, 3> bv{};
            for (std::size_t i = lo; i < hi; ++i) {
                std::array<double, 3> acc{};
                for (std::size_t j = 0; j < N; ++j) {
                    if (j == i) continue;
                    double r2 = 0.0;
                    for (int a = 0; a < d; ++a) {
                        diff[a] = pos[i * d + a] - pos[j * d + a];
                        r2 += diff[a] * diff[a];
                    }
                    if (r2 < trunc * trunc) continue;
                    b_kernel.eval(0.0, std::span<const double>(diff.data(), d),
                                  std::span<double>(bv.data(), d));
                    for (int a = 0; a < d; ++a) acc[a] += bv[a];
                }
                for (int a = 0; a < d; ++a) forces[i * d + a] = acc[a] / static_cast<double>(N);
            }
        }, 8);
        // independent stable noises per particle; streams keyed by (particle, step)
        parallel_for(N, [&](std::size_t lo, std::size_t hi) {
            std::array<double, 3> dz{};
            for (std::size_t i = lo; i < hi; ++i) {
                RandomStream rng = RandomStream::substream(seed ^ (0x9E77 + 7919 * (k + 1)), i);
                sde::sample_stable_increment(opt.dt, params, rng, std::span<double>(dz.data(), d));
                for (int a = 0; a < d; ++a)
                    next[i * d + a] = st.positions[i * d + a] - forces[i * d + a] * opt.dt + dz[a];
            }
        }, 256);
        st.positions.swap(next);
        if (opt.snapshot_every > 0 && ((k + 1) % opt.snapshot_every == 0)) snaps.push_back(st);
    }
    if (opt.snapshot_every == 0 || snaps.back().positions != st.positions) snaps.push_back(st);
    return snaps;
}

namespace {

std::vector<double> gaussian_smooth(const SpatialGrid& g, std::vector<double> field,
                                    double bandwidth) {
    const auto dims = space_dims(g);
    std::vector<cplx> w(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) w[i] = cplx(field[i], 0.0);
    fft_nd(w, dims, false);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double xi = xi_abs(g, i);
        w[i] *= std::exp(-0.5 * bandwidth * bandwidth * xi * xi);
    }
    fft_nd(w, dims, true);
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = w[i].real();
    return field;
}

} // namespace

double propagation_gap(const ParticleState& particles, const DensityEvolution& meanfield,
                       double smoothing) {
    const SpatialGrid& g = meanfield.grid;
    // histogram of particle positions on the grid
    std::vector<double> hist(g.size(), 0.0);
    const double vol = g.cell_volume();
    for (std::size_t i = 0; i < particles.N; ++i) {
        std::size_t flat = 0;
        for (int a = 0; a < g.d; ++a) {
            const double x = particles.positions[i * g.d + a];
            double u = (x + 0.5 * g.Lx) / g.dx();
            u -= g.Nx * std::floor(u / g.Nx); // periodic fold
            const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(u), g.Nx - 1);
            flat = flat * g.Nx + idx;
        }
        hist[flat] += 1.0 / (particles.N * vol);
    }
    std::vector<double> smooth_hist = gaussian_smooth(g, std::move(hist), smoothing);
    std::vector<double> smooth_rho = gaussian_smooth(g, meanfield.rho.back(), smoothing);
    double l1 = 0.0;
    for (std::size_t i = 0; i < smooth_hist.size(); ++i)
        l1 += std::abs(smooth_hist[i] - smooth_rho[i]);
    return l1 * vol;
}

double apriori_time_constant(double p, double r_exponent, double alpha, int d, double lambda) {
    // int_0^inf t^{-1 + 1/alpha - (d/alpha)(p/r - 1)} e^{-p lambda t} dt
    const double expo = -1.0 + 1.0 / alpha - (d / alpha) * (p / r_exponent - 1.0);
    if (expo <= -1.0) return std::numeric_limits<double>::infinity();
    auto f = [&](double t) { return std::pow(t, expo) * std::exp(-p * lambda * t); };
    return graded_endpoint_quad(f, 0.0, 40.0 / std::max(p * lambda, 1e-2), 0.0, 1e-9);
}

AprioriReport apriori_bound_check(const DensityEvolution& evo, double p, double r_exponent,
                                  double alpha, std::size_t nt_pad) {
    const SpatialGrid& sg = evo.grid;
    BoxGrid g(evo.T, sg.Lx, nt_pad, sg.Nx, sg.d);

    // xi = e^{-lambda t} rho resampled onto the box
    FieldOnGrid xi(g);
    {
        auto& vals = xi.values();
        const std::size_t sp = g.space_size();
        for (std::size_t it = 0; it < g.Nt; ++it) {
            const double t = g.time_at(it);
            const double u = t / evo.dt;
            const std::size_t k0 = std::min<std::size_t>(static_cast<std::size_t>(u), evo.steps() - 1);
            const double w = u - static_cast<double>(k0);
            const double damp = std::exp(-evo.lambda * t);
            for (std::size_t i = 0; i < sp; ++i)
                vals[it * sp + i] = damp * ((1.0 - w) * evo.rho[k0][i] + w * evo.rho[k0 + 1][i]);
        }
    }
    AprioriReport rep;
    const double gplus = (2.0 / p) * (1.0 - 1.0 / alpha);
    rep.lhs = spectral::bessel_norm(xi, gplus, p, evo.lambda, alpha);

    // delta-kernel right-hand side with the initial slice
    FieldOnGrid h0(g);
    {
        auto& hv = h0.values();
        const std::size_t sp = g.space_size();
        for (std::size_t it = 0; it < g.Nt; ++it)
            for (std::size_t i = 0; i < sp; ++i) hv[it * sp + i] = evo.rho.front()[i];
    }
    spectral::SymbolPower base;
    base.lambda = evo.lambda;
    base.alpha = alpha;
    const double pprime = p / (p - 1.0);
    const double gamma1 = 2.0 * (1.0 / pprime + 1.0 / (alpha * p));
    rep.rhs_delta = spectral::delta_resolvent(h0, 0.0, gamma1, base).lp_norm(p);
    rep.ratio_delta = rep.lhs / std::max(rep.rhs_delta, 1e-300);

    // L^r right-hand side
    double hr = 0.0;
    for (double v : evo.rho.front()) hr += std::pow(std::abs(v), r_exponent);
    hr = std::pow(hr * sg.cell_volume(), 1.0 / r_exponent);
    rep.time_integral_constant = apriori_time_constant(p, r_exponent, alpha, sg.d, evo.lambda);
    rep.rhs_lr = std::pow(rep.time_integral_constant, 1.0 / p) * hr;
    rep.ratio_lr = rep.lhs / std::max(rep.rhs_lr, 1e-300);
    return rep;
}

YoungMorreyReport young_morrey_check(const drift::DriftField& b_kernel,
                                     const DensityEvolution& evo, double eps, double alpha,
                                     const morrey::MorreyReport& elliptic_rhs) {
    if (evo.conv_drift.empty())
        throw ConfigError("young_morrey_check: run meanfield_solve with store_convolutions");
    const SpatialGrid& sg = evo.grid;
    if (b_kernel.d != sg.d) throw ConfigError("young_morrey_check: kernel dimension mismatch");
    // |b * rho|^{1/(alpha-1)} on a box grid covering the stored steps
    std::size_t nt = 8;
    while (nt < evo.conv_drift.size()) nt *= 2;
    BoxGrid g(evo.dt * static_cast<double>(evo.conv_drift.size()), sg.Lx, nt, sg.Nx, sg.d);
    FieldOnGrid w(g);
    {
        auto& wv = w.values();
        const std::size_t sp = g.space_size();
        for (std::size_t it = 0; it < g.Nt; ++it) {
            const double t = g.time_at(it);
            std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(t / evo.dt),
                                                  evo.conv_drift.size() - 1);
            const auto& conv = evo.conv_drift[k];
            for (std::size_t i = 0; i < sp; ++i) {
                double m = 0.0;
                for (int a = 0; a < sg.d; ++a) m += conv[i * sg.d + a] * conv[i * sg.d + a];
                m = std::sqrt(m);
                wv[it * sp + i] = (m == 0.0) ? 0.0 : std::pow(m, 1.0 / (alpha - 1.0));
            }
        }
    }
    morrey::SamplingPlan plan;
    for (int k = -4; k <= 1; ++k) plan.radii.push_back(std::pow(2.0, k));
    plan.centers_t = {0.0, 0.25 * evo.T, 0.5 * evo.T};
    plan.centers_x.push_back({0.0, 0.0, 0.0});
    plan.centers_x.push_back({0.5, 0.0, 0.0});
    plan.centers_x.push_back({0.0, 1.0, 0.0});
    morrey::MorreyReport lhs = morrey::parabolic_morrey_norm_grid(w, 1.0 + eps, plan, alpha);

    YoungMorreyReport out;
    out.lhs = lhs.norm_estimate;
    out.rhs = elliptic_rhs.norm_estimate;
    out.cylinders = plan.radii.size() * plan.centers_t.size() * plan.centers_x.size();
    // the sampled sup is the worst cylinder, so one comparison covers them all
    out.holds_on_all_cylinders = out.lhs <= out.rhs * (1.0 + 1e-9) + 1e-12;
    return out;
}

} // namespace mv
} // namespace fraclab

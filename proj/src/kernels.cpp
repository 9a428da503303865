#include "fraclab/kernels.hpp"

#include <cmath>
#include <limits>

#include "fraclab/numerics.hpp"
#include "fraclab/parallel.hpp"

namespace fraclab {
namespace kernels {

namespace {

// p_beta with no range restriction; the public comparison_kernel validates
// gamma, but gradient bounds need negative orders as well.
double p_beta_raw(double t, double abs_x, double beta, const StableParams& p) {
    if (t <= 0.0) return 0.0;
    const double t_scale = std::pow(t, 1.0 / p.alpha);
    if (abs_x >= t_scale)
        return std::pow(t, 0.5 * beta) * std::pow(abs_x, -(p.d + p.alpha));
    return std::pow(t, 0.5 * beta - (p.d + p.alpha) / p.alpha);
}

// J0/J1 through a dense cached table (4-point Lagrange between nodes); the
// std implementation is accurate but far too slow for millions of quadrature
// nodes. Interpolation error is ~1e-13 absolute at this spacing.
class BesselTable {
  public:
    static double j0(double z) { return instance().eval(z, 0); }
    static double j1(double z) { return instance().eval(z, 1); }

  private:
    static constexpr double kStep = 0.002;
    static constexpr double kMax = 1500.0;

    std::vector<double> t0_, t1_;

    BesselTable() {
        const std::size_t n = static_cast<std::size_t>(kMax / kStep) + 4;
        t0_.resize(n);
        t1_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = kStep * static_cast<double>(i);
            t0_[i] = std::cyl_bessel_j(0.0, z);
            t1_[i] = std::cyl_bessel_j(1.0, z);
        }
    }

    static const BesselTable& instance() {
        static const BesselTable tab;
        return tab;
    }

    double eval(double z, int order) const {
        z = std::abs(z);
        if (z >= kMax) {
            // large-argument asymptotics, ~1e-9 at this range
            const double phase = z - (order == 0 ? 0.25 : 0.75) * M_PI;
            const double amp = std::sqrt(2.0 / (M_PI * z));
            const double mu = 4.0 * order * order;
            return amp * (std::cos(phase) + (mu - 1.0) / (8.0 * z) * std::sin(phase));
        }
        const auto& t = (order == 0) ? t0_ : t1_;
        const double u = z / kStep;
        std::ptrdiff_t i = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(u) - 1, 0,
                                                      static_cast<std::ptrdiff_t>(t.size()) - 4);
        const double s = u - static_cast<double>(i);
        const double c0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        const double c1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        const double c2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        const double c3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        return c0 * t[i] + c1 * t[i + 1] + c2 * t[i + 2] + c3 * t[i + 3];
    }
};

struct RadialIntegrand {
    // Integrand of the Hankel-type inversion at fixed rho, as a function of
    // the radial frequency r, including the fixed prefactor.
    int d;
    double alpha;
    double rho;
    bool derivative;

    double operator()(double r) const {
        const double damp = std::exp(-std::pow(r, alpha));
        const double z = r * rho;
        if (!derivative) {
            switch (d) {
                case 1: return damp * std::cos(z) / M_PI;
                case 2: return damp * BesselTable::j0(z) * r / (2.0 * M_PI);
                case 3:
                    if (rho < 1e-12) return damp * r * r / (2.0 * M_PI * M_PI);
                    return damp * std::sin(z) * r / (2.0 * M_PI * M_PI * rho);
                default: break;
            }
        } else {
            switch (d) {
                case 1: return -damp * std::sin(z) * r / M_PI;
                case 2: return -damp * BesselTable::j1(z) * r * r / (2.0 * M_PI);
                case 3: {
                    if (rho < 1e-12) return 0.0;
                    const double a = -std::sin(z) / (rho * rho);
                    const double b = std::cos(z) * r / rho;
                    return damp * r * (a + b) / (2.0 * M_PI * M_PI);
                }
                default: break;
            }
        }
        throw ConfigError("StableDensity: spatial dimension must be 1, 2 or 3");
    }
};

// Panelled Gauss-Legendre along the frequency axis. Panels are at most a
// half-period of the oscillation wide; the run stops once the exponential
// envelope makes further panels irrelevant.
double oscillatory_quad(const RadialIntegrand& f, double rel_tol) {
    const double panel = M_PI / std::max(f.rho, 1.0);
    KahanSum acc;
    // first panel: e^{-r^alpha} has a derivative kink at r=0 when alpha<1
    auto fn = [&](double r) { return f(r); };
    acc.add(graded_endpoint_quad(fn, 0.0, panel, 0.0, rel_tol));
    double lo = panel;
    int quiet = 0;
    const int max_panels = 200000;
    for (int k = 1; k < max_panels; ++k) {
        const double hi = lo + panel;
        const double piece = gl_integrate(fn, lo, hi, GaussLegendre::order16());
        acc.add(piece);
        const double floor = rel_tol * std::max(std::abs(acc.value()), 1e-30);
        if (std::abs(piece) < floor && std::exp(-std::pow(hi, f.alpha)) < floor)
            ++quiet;
        else
            quiet = 0;
        if (quiet >= 3) return acc.value();
        lo = hi;
    }
    throw ConvergenceFailure("StableDensity: oscillatory quadrature did not settle");
}

} // namespace

double comparison_kernel(double t, double abs_x, double gamma, const StableParams& p) {
    if (!(gamma > 0.0 && gamma <= 2.0)) throw InvalidExponent("comparison_kernel: gamma must lie in (0,2]");
    if (!std::isfinite(abs_x) || abs_x < 0.0) throw InvalidExponent("comparison_kernel: |x| must be finite and >= 0");
    return p_beta_raw(t, abs_x, gamma, p);
}

StableDensity::StableDensity(const StableParams& p, double rel_tol) : params_(p), rel_tol_(rel_tol) {
    params_.validate();
    if (p.d > 3) throw ConfigError("StableDensity: radial inversion implemented for d in {1,2,3}");
    build_tables();
}

double StableDensity::profile_direct(double rho) const {
    return oscillatory_quad(RadialIntegrand{params_.d, params_.alpha, std::max(rho, 0.0), false}, rel_tol_);
}

double StableDensity::profile_deriv_direct(double rho) const {
    return oscillatory_quad(RadialIntegrand{params_.d, params_.alpha, std::max(rho, 0.0), true}, rel_tol_);
}

double StableDensity::profile_second_scheme(double rho) const {
    // Composite trapezoid with one Richardson extrapolation, refined until
    // stable. Entirely disjoint machinery from the panelled rule.
    const RadialIntegrand f{params_.d, params_.alpha, std::max(rho, 0.0), false};
    const double R = std::pow(-std::log(1e-22), 1.0 / params_.alpha);
    std::size_t n = 512;
    double prev_rich = std::numeric_limits<double>::quiet_NaN();
    double prev_trap = 0.0;
    for (int level = 0; level < 16; ++level, n *= 2) {
        const double h = R / static_cast<double>(n);
        KahanSum s;
        s.add(0.5 * (f(0.0) + f(R)));
        for (std::size_t i = 1; i < n; ++i) s.add(f(h * static_cast<double>(i)));
        const double trap = s.value() * h;
        if (level > 0) {
            const double rich = (4.0 * trap - prev_trap) / 3.0;
            if (std::isfinite(prev_rich) && std::abs(rich - prev_rich) <= 1e-9 * std::max(1e-12, std::abs(rich)))
                return rich;
            prev_rich = rich;
        }
        prev_trap = trap;
    }
    throw ConvergenceFailure("StableDensity: trapezoid scheme did not converge");
}

void StableDensity::build_tables() {
    const std::size_t n = 2401;
    head_step_ = head_max_ / static_cast<double>(n - 1);
    head_.assign(n, 0.0);
    head_deriv_.assign(n, 0.0);
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double rho = head_step_ * static_cast<double>(i);
            head_[i] = profile_direct(rho);
            head_deriv_[i] = profile_deriv_direct(rho);
        }
    }, 16);
    tail_w_.assign(tail_n_, 0.0);
    tail_wd_.assign(tail_n_, 0.0);
    const double pw = params_.d + params_.alpha;
    parallel_for(tail_n_, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double rho = head_max_ * std::pow(tail_max_ / head_max_,
                                                    static_cast<double>(i) / (tail_n_ - 1));
            tail_w_[i] = profile_direct(rho) * std::pow(rho, pw);
            tail_wd_[i] = profile_deriv_direct(rho) * std::pow(rho, pw + 1.0);
        }
    }, 4);
}

namespace {
double lagrange4(const std::vector<double>& tab, double step, double x) {
    const double u = x / step;
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(u);
    i = std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(tab.size()) - 4);
    const double t = u - static_cast<double>(i); // in [1,2] typically
    const double c0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    const double c1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    const double c2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    const double c3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    return c0 * tab[i] + c1 * tab[i + 1] + c2 * tab[i + 2] + c3 * tab[i + 3];
}
} // namespace

double StableDensity::tail_interp(const std::vector<double>& w, double rho) const {
    const double u = std::log(rho / head_max_) / std::log(tail_max_ / head_max_) *
                     static_cast<double>(tail_n_ - 1);
    if (u >= static_cast<double>(tail_n_ - 1)) return w.back();
    const std::size_t i = static_cast<std::size_t>(u);
    const double s = u - static_cast<double>(i);
    return (1.0 - s) * w[i] + s * w[i + 1];
}

double StableDensity::profile(double rho) const {
    if (rho < head_max_) return lagrange4(head_, head_step_, rho);
    return tail_interp(tail_w_, rho) * std::pow(rho, -(params_.d + params_.alpha));
}

double StableDensity::profile_deriv(double rho) const {
    if (rho < head_max_) return lagrange4(head_deriv_, head_step_, rho);
    return tail_interp(tail_wd_, rho) * std::pow(rho, -(params_.d + params_.alpha + 1.0));
}

double StableDensity::operator()(double t, double abs_x) const {
    if (t <= 0.0) return 0.0;
    const double s = std::pow(t, -1.0 / params_.alpha);
    return std::pow(t, -static_cast<double>(params_.d) / params_.alpha) * profile(s * std::abs(abs_x));
}

double StableDensity::gradient_magnitude(double t, double abs_x) const {
    if (t <= 0.0) return 0.0;
    const double s = std::pow(t, -1.0 / params_.alpha);
    return std::pow(t, -(params_.d + 1.0) / params_.alpha) * std::abs(profile_deriv(s * std::abs(abs_x)));
}

double StableDensity::mass(double abs_tol) const {
    const double surface = sphere_surface_area(params_.d);
    auto f = [&](double rho) { return profile(rho) * std::pow(rho, params_.d - 1); };
    const double body = adaptive_quad(f, 0.0, tail_max_, 1e-9, abs_tol * 0.1);
    const double beyond = tail_w_.back() * std::pow(tail_max_, -params_.alpha) / params_.alpha;
    return surface * (body + beyond);
}

double resolvent_constant(double gamma) {
    if (!(gamma > 0.0 && gamma <= 2.0)) throw InvalidExponent("resolvent_constant: gamma must lie in (0,2]");
    return 1.0 / std::tgamma(0.5 * gamma);
}

double frac_resolvent_kernel(const StableDensity& q, double t, double abs_x, double gamma,
                             double lambda) {
    if (t <= 0.0) return 0.0;
    return std::exp(-lambda * t) * resolvent_constant(gamma) * std::pow(t, 0.5 * gamma - 1.0) *
           q(t, abs_x);
}

BoundGrid make_bound_grid(double tmin, double tmax, double xmax, int nt, int nx) {
    BoundGrid g;
    for (int i = 0; i < nt; ++i)
        g.times.push_back(tmin * std::pow(tmax / tmin, static_cast<double>(i) / (nt - 1)));
    for (int j = 0; j < nx; ++j)
        g.radii.push_back(xmax * static_cast<double>(j) / (nx - 1));
    return g;
}

BoundReport verify_bounds(const StableDensity& q, double gamma, const BoundGrid& grid) {
    const StableParams& p = q.params();
    const double cgam = resolvent_constant(gamma);
    BoundReport rep;
    rep.c_hat = std::numeric_limits<double>::infinity();
    rep.C_hat = 0.0;
    rep.C1_hat = 0.0;
    for (double t : grid.times) {
        if (t <= 0.0) throw BoundViolation("verify_bounds: grid must avoid t <= 0");
        const double tf = cgam * std::pow(t, 0.5 * gamma - 1.0);
        for (double r : grid.radii) {
            const double qg = tf * q(t, r);
            const double pg = p_beta_raw(t, r, gamma, p);
            const double ratio = qg / pg;
            if (!std::isfinite(ratio)) throw BoundViolation("verify_bounds: ratio overflow");
            rep.c_hat = std::min(rep.c_hat, ratio);
            rep.C_hat = std::max(rep.C_hat, ratio);
            const double gq = tf * q.gradient_magnitude(t, r);
            const double pg1 = p_beta_raw(t, r, gamma - 2.0 / p.alpha, p);
            const double gratio = gq / pg1;
            if (!std::isfinite(gratio)) throw BoundViolation("verify_bounds: gradient ratio overflow");
            rep.C1_hat = std::max(rep.C1_hat, gratio);
            ++rep.points;
        }
    }
    if (!(rep.c_hat > 0.0)) throw BoundViolation("verify_bounds: lower comparison constant is not positive");
    return rep;
}

} // namespace kernels
} // namespace fraclab

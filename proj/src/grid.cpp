#include "fraclab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fraclab/numerics.hpp"
#include "fraclab/parallel.hpp"

namespace fraclab {

namespace {
std::vector<std::size_t> dims_of(const BoxGrid& g) {
    std::vector<std::size_t> dims{g.Nt};
    for (int i = 0; i < g.d; ++i) dims.push_back(g.Nx);
    return dims;
}
} // namespace

FieldOnGrid FieldOnGrid::sample(const BoxGrid& g,
                                const std::function<double(double, std::span<const double>)>& f) {
    FieldOnGrid out(g);
    const std::size_t sp = g.space_size();
    parallel_for(g.size(), [&](std::size_t lo, std::size_t hi) {
        std::array<double, 3> x{};
        for (std::size_t idx = lo; idx < hi; ++idx) {
            const std::size_t it = idx / sp;
            std::size_t rem = idx % sp;
            for (int a = g.d - 1; a >= 0; --a) {
                x[a] = g.coord_at(rem % g.Nx);
                rem /= g.Nx;
            }
            out.phys_[idx] = f(g.time_at(it), std::span<const double>(x.data(), g.d));
        }
    }, 1024);
    return out;
}

FieldOnGrid FieldOnGrid::sample_spatial(const BoxGrid& g,
                                        const std::function<double(std::span<const double>)>& f) {
    FieldOnGrid out(g);
    const std::size_t sp = g.space_size();
    std::vector<double> slice(sp);
    std::array<double, 3> x{};
    for (std::size_t is = 0; is < sp; ++is) {
        std::size_t rem = is;
        for (int a = g.d - 1; a >= 0; --a) {
            x[a] = g.coord_at(rem % g.Nx);
            rem /= g.Nx;
        }
        slice[is] = f(std::span<const double>(x.data(), g.d));
    }
    for (std::size_t it = 0; it < g.Nt; ++it)
        std::copy(slice.begin(), slice.end(), out.phys_.begin() + it * sp);
    return out;
}

void FieldOnGrid::to_spectral() {
    if (tag_ == Tag::spectral) return;
    spec_.resize(phys_.size());
    for (std::size_t i = 0; i < phys_.size(); ++i) spec_[i] = cplx(phys_[i], 0.0);
    fft_nd(spec_, dims_of(grid_), false);
    phys_.clear();
    phys_.shrink_to_fit();
    tag_ = Tag::spectral;
}

void FieldOnGrid::to_physical() {
    if (tag_ == Tag::physical) return;
    std::vector<cplx> tmp = spec_;
    fft_nd(tmp, dims_of(grid_), true);
    phys_.resize(tmp.size());
    for (std::size_t i = 0; i < tmp.size(); ++i) phys_[i] = tmp[i].real();
    spec_.clear();
    spec_.shrink_to_fit();
    tag_ = Tag::physical;
}

FieldOnGrid FieldOnGrid::spectral_copy() const {
    FieldOnGrid c = *this;
    c.to_spectral();
    return c;
}

double FieldOnGrid::lp_norm(double p) const {
    require_physical();
    if (p == std::numeric_limits<double>::infinity()) return max_abs();
    const double vol = grid_.cell_volume();
    const double s = parallel_sum(phys_.size(), [&](std::size_t i) {
        return std::pow(std::abs(phys_[i]), p);
    });
    return std::pow(s * vol, 1.0 / p);
}

double FieldOnGrid::max_abs() const {
    require_physical();
    double m = 0.0;
    for (double v : phys_) m = std::max(m, std::abs(v));
    return m;
}

double FieldOnGrid::integral() const {
    require_physical();
    KahanSum s;
    for (double v : phys_) s.add(v);
    return s.value() * grid_.cell_volume();
}

double FieldOnGrid::slice_integral(std::size_t it) const {
    require_physical();
    const std::size_t sp = grid_.space_size();
    KahanSum s;
    for (std::size_t i = 0; i < sp; ++i) s.add(phys_[it * sp + i]);
    return s.value() * grid_.space_cell_volume();
}

FieldOnGrid& FieldOnGrid::operator+=(const FieldOnGrid& o) {
    require_physical();
    o.require_physical();
    if (!(grid_ == o.grid_)) throw ConfigError("FieldOnGrid: grid mismatch");
    for (std::size_t i = 0; i < phys_.size(); ++i) phys_[i] += o.phys_[i];
    return *this;
}

FieldOnGrid& FieldOnGrid::operator-=(const FieldOnGrid& o) {
    require_physical();
    o.require_physical();
    if (!(grid_ == o.grid_)) throw ConfigError("FieldOnGrid: grid mismatch");
    for (std::size_t i = 0; i < phys_.size(); ++i) phys_[i] -= o.phys_[i];
    return *this;
}

FieldOnGrid& FieldOnGrid::operator*=(double c) {
    require_physical();
    for (double& v : phys_) v *= c;
    return *this;
}

FieldOnGrid operator+(FieldOnGrid a, const FieldOnGrid& b) { return a += b; }
FieldOnGrid operator-(FieldOnGrid a, const FieldOnGrid& b) { return a -= b; }
FieldOnGrid operator*(double c, FieldOnGrid a) { return a *= c; }

double VectorFieldOnGrid::lp_norm(double p) const {
    const BoxGrid& g = grid();
    const std::size_t n = g.size();
    const double vol = g.cell_volume();
    double s = 0.0;
    if (p == std::numeric_limits<double>::infinity()) {
        for (std::size_t i = 0; i < n; ++i) {
            double m2 = 0.0;
            for (const auto& c : comps) m2 += c.values()[i] * c.values()[i];
            s = std::max(s, m2);
        }
        return std::sqrt(s);
    }
    s = parallel_sum(n, [&](std::size_t i) {
        double m2 = 0.0;
        for (const auto& c : comps) m2 += c.values()[i] * c.values()[i];
        return std::pow(m2, 0.5 * p);
    });
    return std::pow(s * vol, 1.0 / p);
}

double inner(const FieldOnGrid& a, const FieldOnGrid& b) {
    if (!(a.grid() == b.grid())) throw ConfigError("inner: grid mismatch");
    const auto& av = a.values();
    const auto& bv = b.values();
    const double s = parallel_sum(av.size(), [&](std::size_t i) { return av[i] * bv[i]; });
    return s * a.grid().cell_volume();
}

FieldOnGrid pointwise(const FieldOnGrid& a, const FieldOnGrid& b) {
    if (!(a.grid() == b.grid())) throw ConfigError("pointwise: grid mismatch");
    FieldOnGrid out = a;
    auto& ov = out.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
    return out;
}

} // namespace fraclab

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fraclab/errors.hpp"
#include "fraclab/fft.hpp"
#include "fraclab/stable_params.hpp"

namespace fraclab {

// Periodic space-time box [0,Lt) x [-Lx/2, Lx/2)^d with power-of-two node
// counts. All fields taking part in one computation share the same BoxGrid.
struct BoxGrid {
    double Lt = 4.0;
    double Lx = 16.0;
    std::size_t Nt = 64;
    std::size_t Nx = 64;
    int d = 2;

    BoxGrid() = default;
    BoxGrid(double Lt_, double Lx_, std::size_t Nt_, std::size_t Nx_, int d_)
        : Lt(Lt_), Lx(Lx_), Nt(Nt_), Nx(Nx_), d(d_) {
        validate();
    }

    void validate() const {
        auto pow2 = [](std::size_t n) { return n >= 8 && (n & (n - 1)) == 0; };
        if (!pow2(Nt) || !pow2(Nx)) throw ConfigError("BoxGrid: Nt, Nx must be powers of two >= 8");
        if (d < 1 || d > 3) throw ConfigError("BoxGrid: d must be 1, 2 or 3");
        if (!(Lt > 0.0 && Lx > 0.0)) throw ConfigError("BoxGrid: box lengths must be positive");
    }

    std::size_t space_size() const {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) s *= Nx;
        return s;
    }
    std::size_t size() const { return Nt * space_size(); }

    double dt() const { return Lt / static_cast<double>(Nt); }
    double dx() const { return Lx / static_cast<double>(Nx); }
    double cell_volume() const { return dt() * std::pow(dx(), d); }
    double space_cell_volume() const { return std::pow(dx(), d); }

    double time_at(std::size_t it) const { return Lt * static_cast<double>(it) / static_cast<double>(Nt); }
    double coord_at(std::size_t ix) const {
        return -0.5 * Lx + Lx * static_cast<double>(ix) / static_cast<double>(Nx);
    }

    // Signed frequency index for FFT bin k of an axis with n points; the
    // Nyquist bin is treated as zero for odd (imaginary) symbols so real
    // fields stay real.
    static double signed_index(std::size_t k, std::size_t n) {
        const std::size_t half = n / 2;
        if (k < half) return static_cast<double>(k);
        if (k == half) return 0.0; // Nyquist, see note above
        return static_cast<double>(k) - static_cast<double>(n);
    }
    static double signed_index_even(std::size_t k, std::size_t n) {
        // for even symbols (|xi|^alpha) the Nyquist bin keeps its magnitude
        const std::size_t half = n / 2;
        if (k <= half) return static_cast<double>(k);
        return static_cast<double>(k) - static_cast<double>(n);
    }

    double tau_at(std::size_t kt) const { return 2.0 * M_PI * signed_index(kt, Nt) / Lt; }
    double xi_at(std::size_t kx) const { return 2.0 * M_PI * signed_index(kx, Nx) / Lx; }
    double xi_abs_component(std::size_t kx) const {
        return 2.0 * M_PI * signed_index_even(kx, Nx) / Lx;
    }

    bool operator==(const BoxGrid& o) const {
        return Lt == o.Lt && Lx == o.Lx && Nt == o.Nt && Nx == o.Nx && d == o.d;
    }
};

// Scalar field sampled on a BoxGrid. Values are stored either in physical
// space (real) or in spectral space (complex DFT coefficients).
class FieldOnGrid {
  public:
    enum class Tag { physical, spectral };

    FieldOnGrid() = default;
    explicit FieldOnGrid(const BoxGrid& g) : grid_(g), phys_(g.size(), 0.0), tag_(Tag::physical) {}

    static FieldOnGrid sample(const BoxGrid& g,
                              const std::function<double(double, std::span<const double>)>& f);
    static FieldOnGrid sample_spatial(const BoxGrid& g,
                                      const std::function<double(std::span<const double>)>& f);

    const BoxGrid& grid() const { return grid_; }
    Tag tag() const { return tag_; }

    std::vector<double>& values() {
        require_physical();
        return phys_;
    }
    const std::vector<double>& values() const {
        require_physical();
        return phys_;
    }
    std::vector<cplx>& spectrum() {
        require_spectral();
        return spec_;
    }
    const std::vector<cplx>& spectrum() const {
        require_spectral();
        return spec_;
    }

    void to_spectral();
    void to_physical();
    FieldOnGrid spectral_copy() const;

    double lp_norm(double p) const;      // grid L^p norm (cell-volume weighted)
    double max_abs() const;
    double integral() const;             // space-time integral
    double slice_integral(std::size_t it) const; // spatial integral of one time slice

    FieldOnGrid& operator+=(const FieldOnGrid& o);
    FieldOnGrid& operator-=(const FieldOnGrid& o);
    FieldOnGrid& operator*=(double c);

  private:
    void require_physical() const {
        if (tag_ != Tag::physical) throw ConfigError("FieldOnGrid: expected physical representation");
    }
    void require_spectral() const {
        if (tag_ != Tag::spectral) throw ConfigError("FieldOnGrid: expected spectral representation");
    }

    BoxGrid grid_;
    std::vector<double> phys_;
    std::vector<cplx> spec_;
    Tag tag_ = Tag::physical;
};

FieldOnGrid operator+(FieldOnGrid a, const FieldOnGrid& b);
FieldOnGrid operator-(FieldOnGrid a, const FieldOnGrid& b);
FieldOnGrid operator*(double c, FieldOnGrid a);

// d-component vector field; components share one grid.
struct VectorFieldOnGrid {
    std::vector<FieldOnGrid> comps;

    VectorFieldOnGrid() = default;
    explicit VectorFieldOnGrid(const BoxGrid& g) : comps(g.d, FieldOnGrid(g)) {}
    const BoxGrid& grid() const { return comps.at(0).grid(); }
    double lp_norm(double p) const; // L^p norm of the euclidean magnitude
};

// Dot product of two scalar fields with the grid measure.
double inner(const FieldOnGrid& a, const FieldOnGrid& b);

// Pointwise multiply: out = a .* b (both physical).
FieldOnGrid pointwise(const FieldOnGrid& a, const FieldOnGrid& b);

} // namespace fraclab

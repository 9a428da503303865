#include "fraclab/fft.hpp"

#include <cmath>

#include "fraclab/parallel.hpp"

namespace fraclab {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Twiddle table per size, built on demand. Tables are tiny (<= N complex).
const std::vector<cplx>& twiddles(std::size_t n, bool inverse) {
    struct Cache {
        std::vector<std::vector<cplx>> fwd, inv; // indexed by log2(n)
    };
    static Cache cache;
    int lg = 0;
    while ((std::size_t{1} << lg) < n) ++lg;
    auto& slot_vec = inverse ? cache.inv : cache.fwd;
    if (static_cast<int>(slot_vec.size()) <= lg) slot_vec.resize(lg + 1);
    auto& tw = slot_vec[lg];
    if (tw.empty()) {
        tw.resize(n / 2);
        const double sign = inverse ? 1.0 : -1.0;
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = sign * 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
            tw[k] = cplx(std::cos(ang), std::sin(ang));
        }
    }
    return tw;
}

} // namespace

void fft_inplace(cplx* data, std::size_t n, std::ptrdiff_t stride, bool inverse) {
    if (n <= 1) return;
    if (!is_pow2(n)) throw ConfigError("fft: size must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i * stride], data[j * stride]);
    }

    const auto& tw = twiddles(n, inverse);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t twstep = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx& a = data[(i + k) * stride];
                cplx& b = data[(i + k + len / 2) * stride];
                const cplx t = b * tw[k * twstep];
                b = a - t;
                a += t;
            }
        }
    }
}

void fft_nd(std::vector<cplx>& data, const std::vector<std::size_t>& dims, bool inverse) {
    std::size_t total = 1;
    for (std::size_t d : dims) total *= d;
    if (data.size() != total) throw ConfigError("fft_nd: data size does not match dims");

    // Transform along each axis; stride arithmetic for row-major layout.
    std::size_t inner = 1; // product of dims after the current axis
    for (std::size_t axis = dims.size(); axis-- > 0;) {
        const std::size_t n = dims[axis];
        const std::size_t outer = total / (n * inner);
        const std::size_t lines = outer * inner;
        if (n > 1) (void)twiddles(n, inverse); // build table before the parallel region
        parallel_for(lines, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t line = lo; line < hi; ++line) {
                const std::size_t o = line / inner;
                const std::size_t i = line % inner;
                cplx* base = data.data() + o * n * inner + i;
                fft_inplace(base, n, static_cast<std::ptrdiff_t>(inner), inverse);
            }
        }, 8);
        inner *= n;
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(total);
        parallel_for(total, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) data[i] *= scale;
        }, 4096);
    }
}

} // namespace fraclab

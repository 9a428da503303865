#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "fraclab/errors.hpp"

namespace fraclab {

using cplx = std::complex<double>;

// In-place radix-2 FFT. Grid sizes in this project are powers of two by
// construction, so no mixed-radix machinery is needed.
void fft_inplace(cplx* data, std::size_t n, std::ptrdiff_t stride, bool inverse);

// Multi-dimensional transform over a dense row-major array with extents
// dims[0] x dims[1] x ... (last index fastest). Inverse includes the 1/N
// normalization so ifft(fft(x)) == x.
void fft_nd(std::vector<cplx>& data, const std::vector<std::size_t>& dims, bool inverse);

} // namespace fraclab

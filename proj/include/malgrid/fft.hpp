#pragma once

#include <complex>
#include <span>

namespace malgrid::fft {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n);

/// In-place 1D DFT; inverse applies the 1/n normalization.
void transform(std::span<cplx> data, bool inverse);

/// In-place 2D DFT of a row-major rows x cols buffer.
void transform_2d(std::span<cplx> data, std::size_t rows, std::size_t cols, bool inverse);

}  // namespace malgrid::fft

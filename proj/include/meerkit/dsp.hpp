#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace meerkit::dsp {

using Complex = std::complex<double>;

/// Smallest power of two >= n (n >= 1).
std::size_t next_pow2(std::size_t n);

/// In-place iterative radix-2 forward DFT. size must be a power of two.
void fft(std::span<Complex> data);

/// Inverse of fft() including the 1/N factor.
void ifft(std::span<Complex> data);

/// Zeroth-order modified Bessel function of the first kind.
double bessel_i0(double x);

/// Kaiser window value at position t in [-1, 1].
double kaiser(double t, double beta);

}  // namespace meerkit::dsp

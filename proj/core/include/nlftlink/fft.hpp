#pragma once

#include <complex>
#include <span>
#include <vector>

namespace nlftlink {

using cplx = std::complex<double>;

// Thin FFTW wrapper. Plans are cached per length and shared between threads;
// execution goes through the new-array interface so concurrent calls are safe.
// Forward is unnormalized, inverse divides by n.
void fft_inplace(std::span<cplx> data);
void ifft_inplace(std::span<cplx> data);

std::vector<cplx> fft(std::span<const cplx> data);
std::vector<cplx> ifft(std::span<const cplx> data);

// DFT bin frequency in Hz for index k of an n-point transform. The Nyquist bin
// (k = n/2) maps to -fs/2 so the layout is symmetric around zero.
double bin_frequency(std::size_t k, std::size_t n, double sample_rate);

}  // namespace nlftlink

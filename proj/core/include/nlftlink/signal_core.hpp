#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nlftlink/fft.hpp"

namespace nlftlink {

// Uniform sampling of one periodic simulation block. Sample i sits at
// t = i / sample_rate; the frequency axis follows bin_frequency().
class SignalGrid {
 public:
  SignalGrid() = default;

  std::size_t n_samples() const { return n_samples_; }
  double sample_rate() const { return sample_rate_; }
  double dt() const { return 1.0 / sample_rate_; }
  double duration() const { return static_cast<double>(n_samples_) / sample_rate_; }
  double bin_width() const { return sample_rate_ / static_cast<double>(n_samples_); }
  double nyquist() const { return 0.5 * sample_rate_; }

  double time(std::size_t i) const { return static_cast<double>(i) / sample_rate_; }
  double frequency(std::size_t k) const { return bin_frequency(k, n_samples_, sample_rate_); }

  // Throws if the largest carrier offset leaves less than 4x headroom.
  void check_headroom(double max_abs_offset) const;

  friend bool operator==(const SignalGrid&, const SignalGrid&) = default;

 private:
  friend SignalGrid make_grid(std::size_t n_samples, double sample_rate);
  SignalGrid(std::size_t n, double fs) : n_samples_(n), sample_rate_(fs) {}

  std::size_t n_samples_ = 2;
  double sample_rate_ = 1.0;
};

SignalGrid make_grid(std::size_t n_samples, double sample_rate);

struct OpticalConstants {
  double carrier_frequency = 193.4e12;  // Hz
  double planck_h = 6.62607015e-34;     // J*s
};

// Complex baseband field in sqrt(W) on a SignalGrid. center_offset tracks the
// nominal frequency of the content relative to the optical reference; it moves
// with frequency_shift().
class ComplexEnvelope {
 public:
  ComplexEnvelope() = default;
  ComplexEnvelope(SignalGrid grid, std::vector<cplx> samples, double center_offset = 0.0);

  static ComplexEnvelope zeros(SignalGrid grid, double center_offset = 0.0);

  const SignalGrid& grid() const { return grid_; }
  std::span<const cplx> samples() const { return samples_; }
  std::span<cplx> mutable_samples() { return samples_; }
  std::vector<cplx>&& release_samples() && { return std::move(samples_); }
  double center_offset() const { return center_offset_; }
  std::size_t size() const { return samples_.size(); }

  // Sum of |A|^2 * dt, in joules.
  double energy() const;

  ComplexEnvelope& operator+=(const ComplexEnvelope& other);
  ComplexEnvelope& scale(double factor);

 private:
  SignalGrid grid_;
  std::vector<cplx> samples_;
  double center_offset_ = 0.0;
};

struct TimeInterval {
  double begin;  // seconds, inclusive
  double end;    // seconds, exclusive
};

double average_power(const ComplexEnvelope& e, std::optional<TimeInterval> window = std::nullopt);
double peak_power(const ComplexEnvelope& e);

// `check` rejects shifts that push the 99% band past Nyquist; `wrap` shifts
// circularly (broadband noise is expected to fold).
enum class ShiftGuard { check, wrap };
ComplexEnvelope frequency_shift(const ComplexEnvelope& e, double df, ShiftGuard guard = ShiftGuard::check);

enum class DelayMode { circular, zero_pad };
ComplexEnvelope delay(const ComplexEnvelope& e, double tau, DelayMode mode = DelayMode::circular);

// Width of the narrowest band symmetric about the spectral centroid holding
// `fraction` of the total spectral power.
double power_bandwidth(const ComplexEnvelope& e, double fraction);

// |X_k|^2 in DFT order, and its power-weighted mean frequency.
std::vector<double> power_spectrum(const ComplexEnvelope& e);
double spectral_centroid(const ComplexEnvelope& e);

// Multiplies the spectrum by H(f). H is evaluated on the grid frequencies.
template <class Transfer>
ComplexEnvelope apply_transfer(const ComplexEnvelope& e, Transfer&& h) {
  std::vector<cplx> spec = fft(e.samples());
  const auto& g = e.grid();
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= h(g.frequency(k));
  ifft_inplace(spec);
  return ComplexEnvelope(g, std::move(spec), e.center_offset());
}

// Zero-phase Butterworth magnitude of the given order, 3 dB full width
// `bandwidth`, centered at `center` (grid frame), with flat loss `il_db`.
double butterworth_power_gain(double f, int order, double bandwidth, double center, double il_db);
ComplexEnvelope butterworth_filter(const ComplexEnvelope& e, int order, double bandwidth,
                                   double center, double il_db = 0.0);

}  // namespace nlftlink

#include "nlftlink/signal_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nlftlink/units.hpp"

namespace nlftlink {

SignalGrid make_grid(std::size_t n_samples, double sample_rate) {
  if (n_samples < 2 || n_samples % 2 != 0)
    throw std::invalid_argument("make_grid: n_samples must be even and >= 2, got " +
                                std::to_string(n_samples));
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("make_grid: sample_rate must be positive");
  return SignalGrid(n_samples, sample_rate);
}

void SignalGrid::check_headroom(double max_abs_offset) const {
  if (sample_rate_ < 4.0 * std::abs(max_abs_offset))
    throw std::invalid_argument("sample rate below 4x the largest carrier offset");
}

ComplexEnvelope::ComplexEnvelope(SignalGrid grid, std::vector<cplx> samples, double center_offset)
    : grid_(grid), samples_(std::move(samples)), center_offset_(center_offset) {
  if (samples_.size() != grid_.n_samples())
    throw std::invalid_argument("ComplexEnvelope: sample count does not match grid");
  for (const auto& s : samples_)
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw std::invalid_argument("ComplexEnvelope: non-finite sample");
}

ComplexEnvelope ComplexEnvelope::zeros(SignalGrid grid, double center_offset) {
  return ComplexEnvelope(grid, std::vector<cplx>(grid.n_samples()), center_offset);
}

double ComplexEnvelope::energy() const {
  double acc = 0.0;
  for (const auto& s : samples_) acc += std::norm(s);
  return acc * grid_.dt();
}

ComplexEnvelope& ComplexEnvelope::operator+=(const ComplexEnvelope& other) {
  if (!(other.grid_ == grid_))
    throw std::invalid_argument("ComplexEnvelope: adding envelopes on different grids");
  for (std::size_t i = 0; i < samples_.size(); ++i) samples_[i] += other.samples_[i];
  return *this;
}

ComplexEnvelope& ComplexEnvelope::scale(double factor) {
  for (auto& s : samples_) s *= factor;
  return *this;
}

double average_power(const ComplexEnvelope& e, std::optional<TimeInterval> window) {
  const auto& g = e.grid();
  std::size_t first = 0;
  std::size_t last = g.n_samples();
  if (window) {
    if (window->begin < 0.0 || window->end > g.duration() + 0.5 * g.dt())
      throw std::invalid_argument("average_power: window outside grid");
    first = static_cast<std::size_t>(std::ceil(window->begin * g.sample_rate() - 1e-9));
    last = static_cast<std::size_t>(std::ceil(window->end * g.sample_rate() - 1e-9));
    last = std::min(last, g.n_samples());
  }
  if (last <= first) throw std::invalid_argument("average_power: empty window");
  double acc = 0.0;
  for (std::size_t i = first; i < last; ++i) acc += std::norm(e.samples()[i]);
  return acc / static_cast<double>(last - first);
}

double peak_power(const ComplexEnvelope& e) {
  double peak = 0.0;
  for (const auto& s : e.samples()) peak = std::max(peak, std::norm(s));
  return peak;
}

std::vector<double> power_spectrum(const ComplexEnvelope& e) {
  const auto spec = fft(e.samples());
  std::vector<double> p(spec.size());
  std::transform(spec.begin(), spec.end(), p.begin(), [](cplx v) { return std::norm(v); });
  return p;
}

namespace {

double centroid_of(const std::vector<double>& p, const SignalGrid& g) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    num += g.frequency(k) * p[k];
    den += p[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

double spectral_centroid(const ComplexEnvelope& e) {
  return centroid_of(power_spectrum(e), e.grid());
}

double power_bandwidth(const ComplexEnvelope& e, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("power_bandwidth: fraction must lie in (0, 1)");
  const auto p = power_spectrum(e);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("power_bandwidth: zero-energy input");
  const auto& g = e.grid();
  const double fc = centroid_of(p, g);

  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto dist = [&](std::size_t k) { return std::abs(g.frequency(k) - fc); };
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });

  // Each bin covers +-half a bin around its frequency, so the band edge that
  // fully contains a bin at distance d sits at d + bin/2. Interpolate the
  // cumulative power linearly between consecutive edges.
  const double half_bin = 0.5 * g.bin_width();
  const double target = fraction * total;
  double cum = 0.0;
  double prev_edge = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double d = dist(order[i]);
    double level = 0.0;
    std::size_t j = i;
    while (j < order.size() && dist(order[j]) - d <= 1e-9 * g.bin_width()) level += p[order[j++]];
    const double edge = d + half_bin;
    if (cum + level >= target) {
      const double w = level > 0.0 ? (target - cum) / level : 1.0;
      return 2.0 * (prev_edge + w * (edge - prev_edge));
    }
    cum += level;
    prev_edge = edge;
    i = j;
  }
  return 2.0 * prev_edge;
}

ComplexEnvelope frequency_shift(const ComplexEnvelope& e, double df, ShiftGuard guard) {
  const auto& g = e.grid();
  if (df == 0.0) return e;
  if (guard == ShiftGuard::check && e.energy() > 0.0) {
    const double edge = std::abs(spectral_centroid(e) + df) + 0.5 * power_bandwidth(e, 0.99);
    if (edge >= g.nyquist()) throw std::invalid_argument("frequency_shift: shifted band would alias");
  }
  std::vector<cplx> out(e.samples().begin(), e.samples().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Phase taken modulo one cycle before the trig call keeps bin-exact shifts
    // exact on long grids.
    const double cycles = std::fmod(df * g.time(i), 1.0);
    out[i] *= std::polar(1.0, 2.0 * kPi * cycles);
  }
  return ComplexEnvelope(g, std::move(out), e.center_offset() + df);
}

namespace {

std::vector<cplx> spectral_delay(std::span<const cplx> x, double tau, double fs) {
  std::vector<cplx> spec(x.begin(), x.end());
  fft_inplace(spec);
  const std::size_t n = spec.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double cycles = std::fmod(bin_frequency(k, n, fs) * tau, 1.0);
    spec[k] *= std::polar(1.0, -2.0 * kPi * cycles);
  }
  ifft_inplace(spec);
  return spec;
}

}  // namespace

ComplexEnvelope delay(const ComplexEnvelope& e, double tau, DelayMode mode) {
  const auto& g = e.grid();
  const std::size_t n = g.n_samples();
  if (tau == 0.0) return e;
  const double shift = tau * g.sample_rate();
  const double rounded = std::round(shift);
  const bool integer = std::abs(shift - rounded) < 1e-9;

  if (mode == DelayMode::circular) {
    std::vector<cplx> out;
    if (integer) {
      out.assign(e.samples().begin(), e.samples().end());
      const auto nn = static_cast<long long>(n);
      long long k = static_cast<long long>(rounded) % nn;
      if (k < 0) k += nn;
      std::rotate(out.rbegin(), out.rbegin() + k, out.rend());
    } else {
      out = spectral_delay(e.samples(), tau, g.sample_rate());
    }
    return ComplexEnvelope(g, std::move(out), e.center_offset());
  }

  if (std::abs(tau) >= g.duration())
    throw std::invalid_argument("delay: zero-pad delay must be shorter than the grid");
  std::vector<cplx> out(n);
  if (integer) {
    const auto k = static_cast<long long>(rounded);
    for (std::size_t i = 0; i < n; ++i) {
      const long long src = static_cast<long long>(i) - k;
      if (src >= 0 && src < static_cast<long long>(n)) out[i] = e.samples()[src];
    }
  } else {
    std::vector<cplx> padded(2 * n);
    // Place the signal in the middle of a doubled buffer so negative and
    // positive delays both stay clear of the wrap point.
    const std::size_t off = n / 2;
    std::copy(e.samples().begin(), e.samples().end(), padded.begin() + off);
    const auto shifted = spectral_delay(padded, tau, g.sample_rate());
    std::copy(shifted.begin() + off, shifted.begin() + off + n, out.begin());
  }
  return ComplexEnvelope(g, std::move(out), e.center_offset());
}

double butterworth_power_gain(double f, int order, double bandwidth, double center, double il_db) {
  const double x = 2.0 * (f - center) / bandwidth;
  return db_to_linear(-il_db) / (1.0 + std::pow(x * x, order));
}

ComplexEnvelope butterworth_filter(const ComplexEnvelope& e, int order, double bandwidth,
                                   double center, double il_db) {
  if (order < 1 || !(bandwidth > 0.0))
    throw std::invalid_argument("butterworth_filter: order and bandwidth must be positive");
  return apply_transfer(e, [&](double f) {
    return cplx(std::sqrt(butterworth_power_gain(f, order, bandwidth, center, il_db)), 0.0);
  });
}

}  // namespace nlftlink

#include "nlftlink/tx_pic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <limits>
#include <optional>
#include <string>

#include "nlftlink/units.hpp"

namespace nlftlink {

void ChannelPlan::validate() const {
  for (int k = 1; k < kChannels; ++k) {
    const double spacing = delta_f[k] - delta_f[k - 1];
    if (!(spacing > 0.0)) throw std::invalid_argument("channel offsets must be strictly increasing");
    if (spacing < comb_fsr_min - 1.0 || spacing > comb_fsr_max + 1.0)
      throw std::invalid_argument("channel spacing outside the comb FSR range");
  }
  if (!(dt > 0.0) || !(tw > 0.0)) throw std::invalid_argument("Dt and TW must be positive");
  if (center(kChannels) >= tw) throw std::invalid_argument("four pulses do not fit in the window");
  const bool wg_ok = std::any_of(kTauWgOptions.begin(), kTauWgOptions.end(),
                                 [&](double o) { return std::abs(o - tau_wg) < 0.5e-12; });
  if (!wg_ok) throw std::invalid_argument("tau_wg must be 300 ps or 500 ps");
  if (linewidth < 0.0) throw std::invalid_argument("linewidth must be non-negative");
}

MzmParams MzmParams::from_vpi_l(double vpi_l_v_cm, double length_mm) {
  MzmParams mp;
  mp.vpi = vpi_l_v_cm / (0.1 * length_mm);
  return mp;
}

std::vector<cplx> qpsk_map(std::span<const std::uint8_t> bits) {
  if (bits.size() % 2 != 0) throw std::invalid_argument("qpsk_map: odd number of bits");
  const double a = 1.0 / std::sqrt(2.0);
  std::vector<cplx> out(bits.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double re = bits[2 * k + 1] ? -a : a;
    const double im = bits[2 * k] ? -a : a;
    out[k] = {re, im};
  }
  return out;
}

std::array<std::uint8_t, 2> qpsk_demap(cplx symbol) {
  return {static_cast<std::uint8_t>(symbol.imag() < 0.0),
          static_cast<std::uint8_t>(symbol.real() < 0.0)};
}

cplx qpsk_decide(cplx symbol) {
  const double a = 1.0 / std::sqrt(2.0);
  return {symbol.real() < 0.0 ? -a : a, symbol.imag() < 0.0 ? -a : a};
}

IqDrive soliton_drive(std::span<const PulseSlot> pulses, const SolitonParams& sp,
                      const SignalGrid& grid) {
  const double fs = grid.sample_rate();
  if (!(sp.t0 > 0.0)) throw std::invalid_argument("soliton_drive: T0 must be positive");
  if (sp.t0 * fs < 8.0)
    throw std::invalid_argument("soliton_drive: T0 spans fewer than 8 samples");
  const double period = grid.duration();

  std::vector<double> c;
  c.reserve(pulses.size());
  for (const auto& p : pulses) c.push_back(std::fmod(std::fmod(p.center, period) + period, period));
  std::sort(c.begin(), c.end());
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double gap = k + 1 < c.size() ? c[k + 1] - c[k] : c.front() + period - c[k];
    if (c.size() > 1 && gap < grid.dt())
      throw std::invalid_argument("soliton_drive: pulse centers closer than one sample");
  }

  const auto n = static_cast<long long>(grid.n_samples());
  const auto reach = std::min<long long>(static_cast<long long>(std::ceil(40.0 * sp.t0 * fs)), n / 2);
  IqDrive d{std::vector<double>(grid.n_samples()), std::vector<double>(grid.n_samples())};
  for (const auto& p : pulses) {
    const double center = std::fmod(std::fmod(p.center, period) + period, period);
    const auto i0 = static_cast<long long>(std::llround(center * fs));
    const cplx amp = sp.peak_drive * p.symbol;
    for (long long j = -reach; j <= reach; ++j) {
      const long long idx = ((i0 + j) % n + n) % n;
      const double t = static_cast<double>(i0 + j) / fs;
      const double env = 1.0 / std::cosh((t - center) / sp.t0);
      d.i[idx] += amp.real() * env;
      d.q[idx] += amp.imag() * env;
    }
  }
  return d;
}

ComplexEnvelope mzm_modulate(double carrier_power, const IqDrive& drive, const MzmParams& mp,
                             const SignalGrid& grid) {
  if (!(mp.vpi > 0.0) || !(mp.eo_bandwidth > 0.0))
    throw std::invalid_argument("mzm_modulate: vpi and bandwidth must be positive");
  if (drive.i.size() != grid.n_samples() || drive.q.size() != grid.n_samples())
    throw std::invalid_argument("mzm_modulate: drive length does not match grid");
  for (std::size_t k = 0; k < drive.i.size(); ++k) {
    if (std::abs(drive.i[k] * mp.drive_gain) > mp.vpi * (1.0 + 1e-12) ||
        std::abs(drive.q[k] * mp.drive_gain) > mp.vpi * (1.0 + 1e-12))
      throw std::invalid_argument("mzm_modulate: drive exceeds +-Vpi (over-modulation)");
  }

  // I and Q share the real single-pole response, so filter them as one
  // complex signal.
  std::vector<cplx> v(drive.i.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = {drive.i[k], drive.q[k]};
  fft_inplace(v);
  for (std::size_t k = 0; k < v.size(); ++k)
    v[k] /= cplx(1.0, grid.frequency(k) / mp.eo_bandwidth);
  ifft_inplace(v);

  const double scale = std::sqrt(carrier_power) * db_to_field(-mp.il_db) / std::sqrt(2.0);
  const double k_phase = kPi * mp.drive_gain / (2.0 * mp.vpi);
  for (auto& s : v) s = scale * cplx(std::sin(k_phase * s.real()), std::sin(k_phase * s.imag()));
  return ComplexEnvelope(grid, std::move(v));
}

namespace {

struct ReferencePulse {
  SignalGrid grid;
  IqDrive drive;
};

ReferencePulse reference_pulse(const SolitonParams& sp) {
  auto grid = make_grid(4096, 256e9);
  const PulseSlot slot{grid.duration() / 2, std::polar(1.0, kPi / 4)};
  return {grid, soliton_drive(std::span(&slot, 1), sp, grid)};
}

double penalty_for(const ReferencePulse& ref, const MzmParams& mp) {
  const auto out = mzm_modulate(1.0, ref.drive, mp, ref.grid);
  return -linear_to_db(peak_power(out));
}

}  // namespace

double modulation_penalty_db(const MzmParams& mp, const SolitonParams& sp) {
  return penalty_for(reference_pulse(sp), mp);
}

MzmParams calibrate_penalty(const MzmParams& mp, const SolitonParams& sp, double target_db) {
  const auto ref = reference_pulse(sp);
  double vmax = 0.0;
  for (std::size_t k = 0; k < ref.drive.i.size(); ++k)
    vmax = std::max({vmax, std::abs(ref.drive.i[k]), std::abs(ref.drive.q[k])});
  const double g_max = std::min(10.0, mp.vpi / vmax);

  MzmParams out = mp;
  out.drive_gain = g_max;
  const double best = penalty_for(ref, out);
  if (target_db < best)
    throw UnreachableTarget("calibrate_penalty: target " + std::to_string(target_db) +
                            " dB below the minimum reachable penalty " + std::to_string(best) +
                            " dB");
  // Penalty falls monotonically as the gain grows toward g_max.
  double lo = 0.0;
  double hi = g_max;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * g_max; ++it) {
    const double mid = 0.5 * (lo + hi);
    out.drive_gain = mid;
    if (penalty_for(ref, out) > target_db)
      lo = mid;
    else
      hi = mid;
  }
  out.drive_gain = 0.5 * (lo + hi);
  return out;
}

ComplexEnvelope crow_filter(const ComplexEnvelope& e, const CrowFilterSpec& spec) {
  if (spec.order != 2 && spec.order != 4)
    throw std::invalid_argument("crow_filter: order must be 2 or 4");
  if (!(spec.bandwidth_3db > 0.0)) throw std::invalid_argument("crow_filter: bandwidth must be positive");
  if (std::abs(spec.center_offset) + 0.5 * spec.bandwidth_3db >= e.grid().nyquist())
    throw std::invalid_argument("crow_filter: pass band outside the Nyquist range");
  return butterworth_filter(e, spec.order, spec.bandwidth_3db, spec.center_offset, spec.il_db);
}

namespace {

bool congruent(double x, double modulus, double tol) {
  const double r = std::fmod(std::fmod(x, modulus) + modulus, modulus);
  return r < tol || modulus - r < tol;
}

std::optional<double> feasible_wg(double dt, double tw, std::span<const double> options) {
  constexpr double tol = 0.5e-12;
  if (!(dt > 0.0) || 3.5 * dt >= tw) return std::nullopt;
  for (double wg : options)
    if (congruent(wg + 2.0 * dt, tw, tol)) return wg;
  return std::nullopt;
}

}  // namespace

TimingSolution timing_solve(double dt, double tw, std::span<const double> tau_wg_options) {
  if (!(tw > 0.0)) throw std::invalid_argument("timing_solve: TW must be positive");
  if (auto wg = feasible_wg(dt, tw, tau_wg_options)) {
    TimingSolution sol;
    sol.tau_wg = *wg;
    sol.tau_awg = std::fmod(dt, tw);
    for (int k = 0; k < kChannels; ++k) sol.centers[k] = dt * (0.5 + k);
    return sol;
  }
  double nearest = std::numeric_limits<double>::quiet_NaN();
  for (long long ps_dt = 1; ps_dt * 1e-12 * 3.5 < tw; ++ps_dt) {
    const double cand = static_cast<double>(ps_dt) * 1e-12;
    if (feasible_wg(cand, tw, tau_wg_options) &&
        (std::isnan(nearest) || std::abs(cand - dt) < std::abs(nearest - dt)))
      nearest = cand;
  }
  throw InfeasibleTiming("timing_solve: no delay setting realizes Dt = " +
                             std::to_string(dt * 1e12) + " ps in TW = " +
                             std::to_string(tw * 1e12) + " ps",
                         nearest);
}

std::vector<double> equalize_peaks(std::span<const double> per_channel_peaks_dbm) {
  if (per_channel_peaks_dbm.empty()) return {};
  const double weakest = *std::min_element(per_channel_peaks_dbm.begin(), per_channel_peaks_dbm.end());
  std::vector<double> att(per_channel_peaks_dbm.size());
  std::transform(per_channel_peaks_dbm.begin(), per_channel_peaks_dbm.end(), att.begin(),
                 [&](double p) { return p - weakest; });
  return att;
}

ComplexEnvelope phase_noise(const ComplexEnvelope& e, double linewidth, std::uint64_t seed) {
  if (linewidth < 0.0) throw std::invalid_argument("phase_noise: negative linewidth");
  if (linewidth == 0.0) return e;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, std::sqrt(2.0 * kPi * linewidth * e.grid().dt()));
  std::vector<cplx> out(e.samples().begin(), e.samples().end());
  double phi = 0.0;
  for (auto& s : out) {
    s *= std::polar(1.0, phi);
    phi += step(rng);
  }
  return ComplexEnvelope(e.grid(), std::move(out), e.center_offset());
}

std::size_t windows_for_bits(std::size_t n_bits, TxMode mode) {
  const std::size_t per_window = mode == TxMode::idealized ? 8 : 4;
  if (n_bits == 0 || n_bits % per_window != 0)
    throw std::invalid_argument("bit count must be a positive multiple of " +
                                std::to_string(per_window));
  return n_bits / per_window;
}

TxOutput assemble_tx(std::span<const std::uint8_t> bits, const ChannelPlan& plan,
                     const SolitonParams& sp, const MzmParams& mp, const TxHardware& hw,
                     TxMode mode, double sample_rate, std::uint64_t seed) {
  plan.validate();
  const std::size_t n_windows = windows_for_bits(bits.size(), mode);
  const double duration = static_cast<double>(n_windows) * plan.tw;
  const double n_exact = duration * sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(n_exact));
  if (std::abs(n_exact - static_cast<double>(n)) > 1e-6)
    throw std::invalid_argument("assemble_tx: block duration is not a whole number of samples");
  const auto grid = make_grid(n, sample_rate);
  grid.check_headroom(std::max(std::abs(plan.delta_f.front()), std::abs(plan.delta_f.back())));
  for (double f : plan.delta_f) {
    const double cycles = f * duration;
    if (std::abs(cycles - std::round(cycles)) > 1e-6)
      throw std::invalid_argument("assemble_tx: carrier offsets must sit on the grid's frequency bins");
  }

  TxOutput out;
  out.n_windows = n_windows;

  // Symbol streams and drive pulse positions per channel.
  std::array<double, kChannels> line_delay{};
  line_delay[0] = line_delay[1] = plan.tau_wg;
  std::array<std::vector<cplx>, kChannels> symbols;
  std::array<std::vector<double>, kChannels> drive_time;
  if (mode == TxMode::idealized) {
    const std::size_t per = bits.size() / kChannels;
    for (int k = 0; k < kChannels; ++k) {
      auto chunk = bits.subspan(k * per, per);
      out.truth[k].bits.assign(chunk.begin(), chunk.end());
      symbols[k] = qpsk_map(chunk);
      for (std::size_t w = 0; w < n_windows; ++w)
        drive_time[k].push_back(static_cast<double>(w) * plan.tw + plan.center(k + 1) - line_delay[k]);
    }
  } else {
    const std::size_t half = bits.size() / 2;
    const auto a_bits = bits.subspan(0, half);
    const auto b_bits = bits.subspan(half, half);
    const auto a = qpsk_map(a_bits);
    const auto b = qpsk_map(b_bits);
    for (int k = 0; k < kChannels; ++k) {
      const bool on_a = (k % 2 == 0);  // channels 1 and 3
      symbols[k] = on_a ? a : b;
      auto src = on_a ? a_bits : b_bits;
      out.truth[k].bits.assign(src.begin(), src.end());
      const double t_ref = plan.center(3) + (on_a ? 0.0 : plan.tau_awg);
      for (std::size_t w = 0; w < n_windows; ++w)
        drive_time[k].push_back(static_cast<double>(w) * plan.tw + t_ref);
    }
  }

  std::array<ComplexEnvelope, kChannels> chan;
  std::array<double, kChannels> peak_dbm{};
  for (int k = 0; k < kChannels; ++k) {
    std::vector<PulseSlot> slots;
    slots.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
      slots.push_back({drive_time[k][w], symbols[k][w]});
      const double c = drive_time[k][w] + line_delay[k];
      out.truth[k].centers.push_back(std::fmod(std::fmod(c, duration) + duration, duration));
    }
    out.truth[k].symbols = symbols[k];

    // CW line through the input coupler and its routing OADM.
    const double df = plan.delta_f[k];
    auto carrier = frequency_shift(
        ComplexEnvelope(grid, std::vector<cplx>(n, cplx(std::sqrt(dbm_to_watt(hw.line_power_dbm)), 0.0))),
        df);
    carrier.scale(db_to_field(-hw.gc_in_il_db));
    auto route = hw.route;
    route.center_offset = df;
    carrier = crow_filter(carrier, route);

    auto field = mzm_modulate(average_power(carrier), soliton_drive(slots, sp, grid), mp, grid);
    field = frequency_shift(field, df);
    if (plan.phase_noise)
      field = phase_noise(field, plan.linewidth, seed + static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL);
    if (line_delay[k] != 0.0) {
      field = delay(field, line_delay[k]);
      field.scale(db_to_field(-hw.delay_il_db));
    }
    auto mux = hw.mux;
    mux.center_offset = df;
    chan[k] = crow_filter(field, mux);
    peak_dbm[k] = watt_to_dbm(peak_power(chan[k]));
  }

  // Odd channels share bus 1 and even channels bus 2; the MMI merges both
  // buses with the same loss, so the sum over channels is the output port.
  const auto att = equalize_peaks(peak_dbm);
  const double common_loss = hw.mmi_il_db + hw.tap_il_db + hw.gc_out_il_db;
  std::vector<cplx> zero(n);
  ComplexEnvelope total(grid, std::move(zero));
  for (int k = 0; k < kChannels; ++k) {
    chan[k].scale(db_to_field(-att[k] - common_loss));
    out.channel_peak_dbm[k] = peak_dbm[k] - att[k] - common_loss;
    total += chan[k];
  }
  out.output = std::move(total);
  return out;
}

}  // namespace nlftlink

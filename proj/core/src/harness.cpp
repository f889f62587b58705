#include "nlftlink/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "nlftlink/rng.hpp"
#include "nlftlink/units.hpp"

namespace nlftlink {

double PointResult::ber(int channel_index) const {
  const auto n = n_bits[channel_index];
  return n ? n_errors[channel_index] / static_cast<double>(n) : 0.0;
}

double PointResult::ber_avg() const {
  double e = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < kChannels; ++k) {
    e += n_errors[k];
    n += n_bits[k];
  }
  return n ? e / static_cast<double>(n) : 0.0;
}

PointResult& PointResult::operator+=(const PointResult& other) {
  for (int k = 0; k < kChannels; ++k) {
    n_errors[k] += other.n_errors[k];
    n_bits[k] += other.n_bits[k];
  }
  n_failures += other.n_failures;
  diagnostics.insert(diagnostics.end(), other.diagnostics.begin(), other.diagnostics.end());
  return *this;
}

std::vector<std::uint8_t> seed_bits(const ScenarioConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(cfg.master_seed, {seed, 0}));
  std::vector<std::uint8_t> bits(cfg.n_bits);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  return bits;
}

Launch launch_block(const ScenarioConfig& cfg, std::span<const std::uint8_t> bits, std::uint64_t stream,
                    bool noiseless) {
  Launch out;
  out.tx = assemble_tx(bits, cfg.plan, cfg.soliton, cfg.mzm, cfg.tx, cfg.mode, cfg.sample_rate,
                       derive_seed(stream, {1}));
  const double pic_peak = *std::max_element(out.tx.channel_peak_dbm.begin(), out.tx.channel_peak_dbm.end());
  EdfaParams booster = cfg.booster;
  booster.gain_db = required_launch_gain(pic_peak, cfg.launch_peak_dbm);
  booster.noiseless = booster.noiseless || noiseless;
  if (booster.gain_db < 0.0) {
    // Already above the target: attenuate instead, noiselessly.
    out.launched = out.tx.output;
    out.launched.scale(db_to_field(booster.gain_db));
  } else {
    auto amp = edfa_amplify(out.tx.output, booster, OpticalConstants{}, derive_seed(stream, {2}));
    out.launched = std::move(amp.envelope);
    out.booster_ase_psd = amp.ase_psd;
  }
  out.signal_power = average_power(out.tx.output) * db_to_linear(booster.gain_db);
  return out;
}

std::vector<PulseWindow> expected_windows(const ScenarioConfig& cfg, const TxOutput& tx, double distance_km) {
  const double half = std::min(2.0 * cfg.plan.dt, 0.5 * cfg.plan.tw);
  const double b2 = cfg.fiber.beta2_s2_per_km();
  std::vector<PulseWindow> out;
  for (int k = 0; k < kChannels; ++k) {
    // A carrier at +df arrives later by -beta2 * 2 pi df * z.
    const double drift = -b2 * 2.0 * kPi * cfg.plan.delta_f[k] * distance_km;
    for (double c : tx.truth[k].centers) out.push_back({k + 1, c + drift, half});
  }
  return out;
}

PointResult evaluate_reception(const ScenarioConfig& cfg, const ComplexEnvelope& received, const TxOutput& tx,
                               double distance_km, bool keep_diagnostics) {
  const auto windows = expected_windows(cfg, tx, distance_km);
  std::array<std::vector<cplx>, kChannels> pilots;
  const std::size_t np = std::min(cfg.rx.pilot_symbols, tx.n_windows);
  for (int k = 0; k < kChannels; ++k)
    pilots[k].assign(tx.truth[k].symbols.begin(), tx.truth[k].symbols.begin() + static_cast<long>(np));

  const auto rx = receive_window(received, cfg.plan, cfg.scales(), windows, distance_km, pilots, cfg.rx);
  PointResult out;
  for (int k = 0; k < kChannels; ++k) {
    const auto& r = rx[k];
    const auto& bits = tx.truth[k].bits;
    const auto syms = std::span<const cplx>(r.symbols).subspan(np);
    const auto erased = std::span<const std::uint8_t>(r.erased).subspan(np);
    const auto count = decide_and_count(syms, std::span<const std::uint8_t>(bits).subspan(2 * np), erased,
                                        cfg.erased_bit_error);
    out.n_errors[k] = count.n_errors;
    out.n_bits[k] = count.n_bits;
    out.n_failures += r.n_failures;
    if (keep_diagnostics) {
      for (std::size_t w = 0; w < r.symbols.size(); ++w) {
        DiagnosticRecord d;
        d.channel = k + 1;
        d.window_index = w;
        d.zeta = r.points[w].zeta;
        d.b = r.points[w].b;
        d.decided_bits = qpsk_demap(r.symbols[w]);
        d.correct = !r.erased[w] && d.decided_bits[0] == bits[2 * w] && d.decided_bits[1] == bits[2 * w + 1];
        out.diagnostics.push_back(d);
      }
    }
  }
  return out;
}

namespace {

std::size_t bits_per_window(TxMode mode) { return mode == TxMode::idealized ? 8 : 4; }

// Smallest window count whose duration keeps every carrier on a frequency bin
// and spans a whole number of samples.
std::size_t window_granularity(const ScenarioConfig& cfg) {
  for (std::size_t g = 1; g <= 4096; ++g) {
    const double dur = static_cast<double>(g) * cfg.plan.tw;
    const double ns = dur * cfg.sample_rate;
    bool ok = std::abs(ns - std::round(ns)) < 1e-6;
    for (double f : cfg.plan.delta_f) ok = ok && std::abs(f * dur - std::round(f * dur)) < 1e-6;
    if (ok) return g;
  }
  throw ConfigError("no window count puts the carriers on the frequency grid");
}

std::vector<std::pair<std::size_t, std::size_t>> segment_windows(const ScenarioConfig& cfg) {
  const std::size_t total = windows_for_bits(cfg.n_bits, cfg.mode);
  const std::size_t n_seg = segment_count(cfg);
  const std::size_t g = window_granularity(cfg);
  const std::size_t units = (total + g - 1) / g;
  if (total % g != 0) throw ConfigError("n_bits does not fill a whole number of grid-compatible windows");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t s = 0; s < n_seg; ++s) {
    const std::size_t u = units / n_seg + (s < units % n_seg ? 1 : 0);
    out.emplace_back(start, start + u * g);
    start += u * g;
  }
  return out;
}

double osnr_db(double signal_power, double ase, double ref_bw) {
  if (ase <= 0.0) return std::numeric_limits<double>::infinity();
  return linear_to_db(signal_power / (2.0 * ase * ref_bw));
}

}  // namespace

std::size_t segment_count(const ScenarioConfig& cfg) {
  const std::size_t total = windows_for_bits(cfg.n_bits, cfg.mode);
  const double per_window = cfg.plan.tw * cfg.sample_rate;
  const double samples = per_window * static_cast<double>(total);
  const std::size_t g = window_granularity(cfg);
  const double unit = per_window * static_cast<double>(g);
  if (unit > static_cast<double>(cfg.max_grid_samples))
    throw ConfigError("limits.max_grid_samples is smaller than the smallest simulation block");
  const auto n = static_cast<std::size_t>(std::ceil(samples / static_cast<double>(cfg.max_grid_samples)));
  return std::max<std::size_t>(1, n);
}

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
  const auto segments = segment_windows(cfg);
  const std::size_t bpw = bits_per_window(cfg.mode);
  const auto& dist = cfg.distances_km;
  const int max_span = static_cast<int>(std::llround(dist.back() / cfg.fiber.span_km));
  std::vector<int> span_to_dist(static_cast<std::size_t>(max_span) + 1, -1);
  for (std::size_t i = 0; i < dist.size(); ++i)
    span_to_dist[static_cast<std::size_t>(std::llround(dist[i] / cfg.fiber.span_km))] = static_cast<int>(i);

  std::optional<std::size_t> diag_index;
  if (opts.diagnostics_distance_km) {
    for (std::size_t i = 0; i < dist.size(); ++i)
      if (std::abs(dist[i] - *opts.diagnostics_distance_km) < 1e-9) diag_index = i;
    if (!diag_index) throw ConfigError("diagnostics distance is not in scenario.distances_km");
  }

  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::vector<ResultRow>> per_seed(n_seeds);
  std::vector<DiagnosticRecord> diagnostics;

  auto run_seed = [&](std::size_t si) {
    const std::uint64_t seed = cfg.seeds[si];
    const std::uint64_t stream = derive_seed(cfg.master_seed, {seed});
    const auto bits = seed_bits(cfg, seed);
    std::vector<PointResult> acc(dist.size());
    std::vector<double> osnr(dist.size(), 0.0);

    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto [w0, w1] = segments[s];
      const auto slice = std::span<const std::uint8_t>(bits).subspan(w0 * bpw, (w1 - w0) * bpw);
      const std::uint64_t seg_stream = derive_seed(stream, {s});
      const auto launch = launch_block(cfg, slice, seg_stream);
      const bool want_diag = diag_index && si == 0;
      propagate_link(launch.launched, max_span, cfg.fiber, cfg.edfa, cfg.step, derive_seed(seg_stream, {3}),
                     OpticalConstants{}, [&](int span, const ComplexEnvelope& e, double ase) {
                       const int di = span_to_dist[static_cast<std::size_t>(span)];
                       if (di < 0) return;
                       const bool keep = want_diag && static_cast<std::size_t>(di) == *diag_index;
                       auto point = evaluate_reception(cfg, e, launch.tx, dist[di], keep);
                       for (auto& d : point.diagnostics) d.window_index += w0;
                       acc[di] += point;
                       if (s == 0) osnr[di] = osnr_db(launch.signal_power, ase + launch.booster_ase_psd,
                                                      cfg.osnr_ref_bandwidth);
                     });
    }

    auto& rows = per_seed[si];
    for (std::size_t i = 0; i < dist.size(); ++i) {
      ResultRow r;
      r.distance_km = dist[i];
      r.dt_ps = cfg.plan.dt * 1e12;
      r.seed = seed;
      for (int k = 0; k < kChannels; ++k) r.ber[k] = acc[i].ber(k);
      r.ber_avg = acc[i].ber_avg();
      r.osnr_db = osnr[i];
      r.n_eigenvalue_failures = acc[i].n_failures;
      rows.push_back(r);
    }
    if (diag_index && si == 0) diagnostics = std::move(acc[*diag_index].diagnostics);
  };

  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_seeds));
  if (n_threads <= 1) {
    for (std::size_t si = 0; si < n_seeds; ++si) run_seed(si);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t si = next++; si < n_seeds; si = next++) run_seed(si);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  RunResult out;
  out.n_segments = segments.size();
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t si = 0; si < n_seeds; ++si) out.rows.push_back(per_seed[si][i]);
  out.summary = summarize(cfg, out.rows);
  out.diagnostics = std::move(diagnostics);
  return out;
}

ScenarioSummary summarize(const ScenarioConfig& cfg, std::span<const ResultRow> rows) {
  ScenarioSummary s;
  std::vector<std::size_t> count;
  for (const auto& r : rows) {
    auto it = std::find(s.distances_km.begin(), s.distances_km.end(), r.distance_km);
    if (it == s.distances_km.end()) {
      s.distances_km.push_back(r.distance_km);
      s.mean_ber.push_back(0.0);
      count.push_back(0);
      it = s.distances_km.end() - 1;
    }
    const auto i = static_cast<std::size_t>(it - s.distances_km.begin());
    s.mean_ber[i] += r.ber_avg;
    ++count[i];
  }
  for (std::size_t i = 0; i < s.mean_ber.size(); ++i) s.mean_ber[i] /= static_cast<double>(count[i]);

  auto reach = [&](double threshold) {
    double d = 0.0;
    for (std::size_t i = 0; i < s.distances_km.size() && s.mean_ber[i] <= threshold; ++i) d = s.distances_km[i];
    return d;
  };
  s.hd_reach_km = reach(cfg.fec.hd);
  s.sd_reach_km = reach(cfg.fec.sd);

  // Bits behind each mean: payload bits per channel times channels times seeds.
  const double pilots_bits = 2.0 * static_cast<double>(cfg.rx.pilot_symbols) * kChannels;
  for (std::size_t i = 1; i < s.mean_ber.size(); ++i) {
    const double drop = s.mean_ber[i - 1] - s.mean_ber[i];
    if (!(drop > 0.0)) continue;
    const double n = std::max(1.0, (static_cast<double>(cfg.n_bits) - pilots_bits) * static_cast<double>(count[i]));
    const double p = 0.5 * (s.mean_ber[i - 1] + s.mean_ber[i]);
    const double se = std::sqrt(2.0 * p * (1.0 - p) / n);
    s.ripples.push_back({s.distances_km[i], drop, drop > 2.0 * se});
  }
  return s;
}

std::array<ChannelTruth, kChannels> transmitted_truth(const ScenarioConfig& cfg, std::uint64_t seed) {
  const auto segments = segment_windows(cfg);
  const auto bits = seed_bits(cfg, seed);
  const std::size_t bpw = bits_per_window(cfg.mode);
  const std::uint64_t stream = derive_seed(cfg.master_seed, {seed});
  std::array<ChannelTruth, kChannels> out;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto [w0, w1] = segments[s];
    const auto slice = std::span<const std::uint8_t>(bits).subspan(w0 * bpw, (w1 - w0) * bpw);
    const auto tx = assemble_tx(slice, cfg.plan, cfg.soliton, cfg.mzm, cfg.tx, cfg.mode, cfg.sample_rate,
                                derive_seed(derive_seed(stream, {s}), {1}));
    const double offset = static_cast<double>(w0) * cfg.plan.tw;
    for (int k = 0; k < kChannels; ++k) {
      const auto& t = tx.truth[k];
      auto& o = out[k];
      o.symbols.insert(o.symbols.end(), t.symbols.begin(), t.symbols.end());
      o.bits.insert(o.bits.end(), t.bits.begin(), t.bits.end());
      for (double c : t.centers) o.centers.push_back(c + offset);
    }
  }
  return out;
}

std::vector<EyeSample> fold_trace(const ComplexEnvelope& e, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("fold_trace: period must be positive");
  std::vector<EyeSample> out;
  out.reserve(e.size());
  const auto& g = e.grid();
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double u = g.time(i) / period;
    double f = u - std::floor(u);
    if (f > 1.0 - 1e-9) f = 0.0;  // multiples of the period that round just below
    out.push_back({f * period, std::abs(e.samples()[i])});
  }
  return out;
}

std::vector<EyeSample> eye_export(const ScenarioConfig& cfg, double distance_km, int channel, EyeFold fold,
                                  std::uint64_t seed) {
  if (channel < 0 || channel > kChannels) throw std::invalid_argument("eye_export: unknown channel");
  const double spans = distance_km / cfg.fiber.span_km;
  if (distance_km < 0.0 || std::abs(spans - std::round(spans)) > 1e-9)
    throw std::invalid_argument("eye_export: distance must be a non-negative multiple of the span length");

  // First simulation block only.
  const auto segments = segment_windows(cfg);
  const auto bits = seed_bits(cfg, seed);
  const std::size_t bpw = bits_per_window(cfg.mode);
  const auto [w0, w1] = segments.front();
  const auto slice = std::span<const std::uint8_t>(bits).subspan(w0 * bpw, (w1 - w0) * bpw);
  const std::uint64_t stream = derive_seed(derive_seed(cfg.master_seed, {seed}), {0});
  const auto launch = launch_block(cfg, slice, stream);
  const auto link = propagate_link(launch.launched, static_cast<int>(std::llround(spans)), cfg.fiber, cfg.edfa,
                                   cfg.step, derive_seed(stream, {3}));
  const double period = fold == EyeFold::dt ? cfg.plan.dt : cfg.plan.tw;
  if (channel == 0) return fold_trace(link.envelope, period);
  return fold_trace(demux(link.envelope, cfg.plan.delta_f[channel - 1], cfg.rx.rx_bw, cfg.rx.demux_order), period);
}

BudgetResult budget_report(const ScenarioConfig& cfg) {
  const auto& b = cfg.budget;
  BudgetResult out;
  out.report = cascade(b.chain, b.source_power_dbm, b.n_lines, b.constraints);
  out.gc = check_gc_limit(out.report, b.n_lines, b.gc_stage, b.gc_limit_dbm, b.gc_tolerance_db);
  return out;
}

}  // namespace nlftlink

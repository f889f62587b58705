#include "nlftlink/nlft_rx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nlftlink/units.hpp"

namespace nlftlink {

void NormalizationScales::validate() const {
  if (!(t0 > 0.0) || !(p_sol > 0.0) || !(l_d_km > 0.0))
    throw std::invalid_argument("normalization scales must be positive");
}

ComplexEnvelope demux(const ComplexEnvelope& e, double channel_offset, double rx_bw, int order) {
  if (std::abs(channel_offset) + 0.5 * rx_bw >= e.grid().nyquist())
    throw std::invalid_argument("demux: channel band outside the Nyquist range");
  auto base = frequency_shift(e, -channel_offset, ShiftGuard::wrap);
  return butterworth_filter(base, order, rx_bw, 0.0, 0.0);
}

NormalizedField normalize(std::span<const cplx> samples, double t_start, double dt,
                          const NormalizationScales& ns) {
  ns.validate();
  NormalizedField out;
  out.q.resize(samples.size());
  const double inv = 1.0 / std::sqrt(ns.p_sol);
  std::transform(samples.begin(), samples.end(), out.q.begin(), [&](cplx s) { return s * inv; });
  out.tau_start = t_start / ns.t0;
  out.dtau = dt / ns.t0;
  return out;
}

NormalizedField normalize(const ComplexEnvelope& e, const NormalizationScales& ns) {
  return normalize(e.samples(), 0.0, e.grid().dt(), ns);
}

namespace {

// exp(A h) for A = [[-i z, q], [-conj(q), i z]] is c I + s A with
// c = cos(k h), s = sin(k h) / k, k^2 = z^2 + |q|^2.
struct Step {
  cplx c;
  cplx s;
};

Step step_coefficients(cplx zeta, cplx q, double h) {
  const cplx k2 = zeta * zeta + std::norm(q);
  const cplx kh = std::sqrt(k2) * h;
  if (std::abs(kh) < 1e-4) {
    const cplx x2 = k2 * h * h;
    return {1.0 - x2 / 2.0 + x2 * x2 / 24.0, h * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)};
  }
  return {std::cos(kh), std::sin(kh) / std::sqrt(k2)};
}

struct Jost {
  cplx phi1, phi2, psi1, psi2;
};

Jost integrate(const NormalizedField& f, cplx zeta, std::size_t m) {
  const cplx i(0.0, 1.0);
  const double h = f.dtau;
  cplx p1 = std::exp(-i * zeta * f.left_edge());
  cplx p2 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto [c, s] = step_coefficients(zeta, f.q[j], h);
    const cplx a11 = c - i * zeta * s;
    const cplx a22 = c + i * zeta * s;
    const cplx n1 = a11 * p1 + f.q[j] * s * p2;
    const cplx n2 = -std::conj(f.q[j]) * s * p1 + a22 * p2;
    p1 = n1;
    p2 = n2;
  }
  cplx r1 = 0.0;
  cplx r2 = std::exp(i * zeta * f.right_edge());
  for (std::size_t j = f.q.size(); j-- > m;) {
    const auto [c, s] = step_coefficients(zeta, f.q[j], h);
    // Inverse step: c I - s A.
    const cplx b11 = c + i * zeta * s;
    const cplx b22 = c - i * zeta * s;
    const cplx n1 = b11 * r1 - f.q[j] * s * r2;
    const cplx n2 = std::conj(f.q[j]) * s * r1 + b22 * r2;
    r1 = n1;
    r2 = n2;
  }
  return {p1, p2, r1, r2};
}

std::size_t matching_index(const NormalizedField& f, const ScatterOptions& opts) {
  double tau_m = 0.0;
  if (opts.matching_tau) {
    tau_m = *opts.matching_tau;
  } else {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < f.q.size(); ++j) {
      const double w = std::abs(f.q[j]);
      num += w * f.tau(j);
      den += w;
    }
    tau_m = den > 0.0 ? num / den : 0.5 * (f.left_edge() + f.right_edge());
  }
  // Boundary m sits at left_edge + m * dtau.
  const double pos = (tau_m - f.left_edge()) / f.dtau;
  const double clamped = std::clamp(std::round(pos), 0.0, static_cast<double>(f.q.size()));
  return static_cast<std::size_t>(clamped);
}

}  // namespace

Transfer zs_transfer(std::span<const cplx> q, double dtau, cplx zeta) {
  const cplx i(0.0, 1.0);
  Transfer m{1.0, 0.0, 0.0, 1.0};
  for (const cplx& qj : q) {
    const auto [c, s] = step_coefficients(zeta, qj, dtau);
    const Transfer a{c - i * zeta * s, qj * s, -std::conj(qj) * s, c + i * zeta * s};
    m = {a[0] * m[0] + a[1] * m[2], a[0] * m[1] + a[1] * m[3],
         a[2] * m[0] + a[3] * m[2], a[2] * m[1] + a[3] * m[3]};
  }
  return m;
}

NlftPoint zs_scatter(const NormalizedField& f, cplx zeta, const ScatterOptions& opts) {
  if (f.q.empty()) throw std::invalid_argument("zs_scatter: empty field");
  if (!(f.dtau > 0.0)) throw std::invalid_argument("zs_scatter: non-positive step");
  if (std::abs(f.q.front()) > opts.edge_tolerance || std::abs(f.q.back()) > opts.edge_tolerance)
    throw ScatteringError("zs_scatter: potential has not decayed at the window edges");

  const auto jost = integrate(f, zeta, matching_index(f, opts));
  NlftPoint p;
  p.zeta = zeta;
  p.a = jost.phi1 * jost.psi2 - jost.phi2 * jost.psi1;
  p.b = jost.phi1 / jost.psi1;
  p.b_check = jost.phi2 / jost.psi2;
  if (opts.check_b && std::abs(p.b - p.b_check) > opts.b_tolerance * std::abs(p.b))
    throw ScatteringError("zs_scatter: phi1/psi1 and phi2/psi2 disagree (not an eigenvalue?)");
  return p;
}

cplx find_eigenvalue(const NormalizedField& q, cplx zeta0, const EigenOptions& opts) {
  if (!(zeta0.imag() > 0.0))
    throw std::invalid_argument("find_eigenvalue: initial guess must lie in the upper half-plane");
  const auto a_of = [&](cplx z) { return zs_scatter(q, z, opts.scatter).a; };
  cplx zeta = zeta0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const cplx a = a_of(zeta);
    if (std::abs(a) < opts.a_tolerance) return zeta;
    const cplx h(opts.fd_step, 0.0);
    const cplx da = (a_of(zeta + h) - a_of(zeta - h)) / (2.0 * h);
    if (da == cplx(0.0, 0.0) || !std::isfinite(std::abs(da)))
      throw EigenvalueError("find_eigenvalue: vanishing derivative");
    cplx delta = -a / da;
    // Keep each update local; a far jump means the guess is outside the basin.
    if (std::abs(delta) > 0.5) delta *= 0.5 / std::abs(delta);
    zeta += delta;
    if (!(zeta.imag() > 0.0))
      throw EigenvalueError("find_eigenvalue: iterate left the upper half-plane");
    if (std::abs(delta) < opts.step_tolerance) return zeta;
  }
  throw EigenvalueError("find_eigenvalue: no convergence in " +
                        std::to_string(opts.max_iterations) + " iterations");
}

cplx compensation_multiplier(cplx zeta, double xi) {
  return std::exp(cplx(0.0, -2.0) * zeta * zeta * xi);
}

NlftPoint channel_compensate(const NlftPoint& p, double xi) {
  NlftPoint out = p;
  const cplx m = compensation_multiplier(p.zeta, xi);
  out.b *= m;
  out.b_check *= m;
  return out;
}

BpsResult blind_phase_search(std::span<const cplx> symbols, int n_test, int window,
                             std::span<const cplx> pilots) {
  if (n_test < 4) throw std::invalid_argument("blind_phase_search: need at least 4 test phases");
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("blind_phase_search: window must be odd");
  const std::size_t n = symbols.size();
  const double step = 0.5 * kPi / n_test;

  // dist[k * n_test + b]: squared distance to the nearest point after rotating by -b*step.
  std::vector<double> dist(n * n_test);
  for (std::size_t k = 0; k < n; ++k)
    for (int b = 0; b < n_test; ++b) {
      const cplx r = symbols[k] * std::polar(1.0, -step * b);
      dist[k * n_test + b] = std::norm(r - qpsk_decide(r));
    }

  BpsResult out{std::vector<cplx>(n), std::vector<double>(n)};
  const auto half = static_cast<std::size_t>(window / 2);
  std::vector<double> acc(n_test, 0.0);
  std::size_t lo = 0;
  std::size_t hi = 0;  // acc covers [lo, hi)
  double prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t want_lo = k > half ? k - half : 0;
    const std::size_t want_hi = std::min(n, k + half + 1);
    while (hi < want_hi) {
      for (int b = 0; b < n_test; ++b) acc[b] += dist[hi * n_test + b];
      ++hi;
    }
    while (lo < want_lo) {
      for (int b = 0; b < n_test; ++b) acc[b] -= dist[lo * n_test + b];
      ++lo;
    }
    const auto best = std::min_element(acc.begin(), acc.end()) - acc.begin();
    double theta = step * static_cast<double>(best);
    if (k > 0) theta += 0.5 * kPi * std::round((prev - theta) / (0.5 * kPi));
    out.phase[k] = theta;
    prev = theta;
  }

  if (!pilots.empty()) {
    const std::size_t np = std::min(pilots.size(), n);
    int best_r = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < 4; ++r) {
      double score = 0.0;
      for (std::size_t k = 0; k < np; ++k) {
        const cplx c = symbols[k] * std::polar(1.0, -out.phase[k] - 0.5 * kPi * r);
        score += std::real(c * std::conj(pilots[k]));
      }
      if (score > best_score) {
        best_score = score;
        best_r = r;
      }
    }
    for (auto& th : out.phase) th += 0.5 * kPi * best_r;
  }
  for (std::size_t k = 0; k < n; ++k) out.symbols[k] = symbols[k] * std::polar(1.0, -out.phase[k]);
  return out;
}

BerCount decide_and_count(std::span<const cplx> rx_symbols, std::span<const std::uint8_t> tx_bits,
                          std::span<const std::uint8_t> erased, double erased_bit_error) {
  if (2 * rx_symbols.size() != tx_bits.size())
    throw std::invalid_argument("decide_and_count: symbol and bit counts do not match");
  if (!erased.empty() && erased.size() != rx_symbols.size())
    throw std::invalid_argument("decide_and_count: erasure mask length mismatch");
  BerCount out;
  out.n_bits = tx_bits.size();
  for (std::size_t k = 0; k < rx_symbols.size(); ++k) {
    if (!erased.empty() && erased[k]) {
      out.n_errors += 2.0 * erased_bit_error;
      continue;
    }
    const auto bits = qpsk_demap(rx_symbols[k]);
    out.n_errors += (bits[0] != tx_bits[2 * k]) + (bits[1] != tx_bits[2 * k + 1]);
  }
  out.ber = out.n_bits ? out.n_errors / static_cast<double>(out.n_bits) : 0.0;
  return out;
}

ChannelReception receive_channel(const ComplexEnvelope& e, int channel, double channel_offset,
                                 std::span<const PulseWindow> windows, const NormalizationScales& ns,
                                 double distance_km, std::span<const cplx> pilots,
                                 const RxOptions& opts) {
  ns.validate();
  const auto base = demux(e, channel_offset, opts.rx_bw, opts.demux_order);
  const auto& g = base.grid();
  std::size_t dec = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(g.sample_rate() / opts.adc_rate)));
  if (g.n_samples() % dec != 0) dec = 1;
  const std::size_t n = g.n_samples() / dec;
  const double dt = g.dt() * static_cast<double>(dec);
  std::vector<cplx> x(n);
  for (std::size_t m = 0; m < n; ++m) x[m] = base.samples()[m * dec];
  const auto nn = static_cast<long long>(n);
  auto at = [&](long long m) { return x[static_cast<std::size_t>(((m % nn) + nn) % nn)]; };

  const double xi = distance_km / ns.l_d_km;
  ScatterOptions sopt;
  sopt.edge_tolerance = std::numeric_limits<double>::infinity();
  sopt.matching_tau = 0.0;
  EigenOptions eopt;
  eopt.scatter = sopt;

  ChannelReception out;
  out.channel = channel;
  for (const auto& w : windows) {
    if (w.channel != channel) continue;
    // |q| centroid inside the search region picks the window center.
    const auto c0 = static_cast<long long>(std::llround(w.center / dt));
    const auto r = static_cast<long long>(std::ceil(opts.search_radius / dt));
    double num = 0.0;
    double den = 0.0;
    for (long long m = c0 - r; m <= c0 + r; ++m) {
      const double a = std::abs(at(m));
      num += a * static_cast<double>(m);
      den += a;
    }
    const double centroid = den > 0.0 ? num / den : static_cast<double>(c0);
    const auto ci = static_cast<long long>(std::llround(centroid));
    const auto hw = static_cast<long long>(std::llround(w.half_width / dt));
    std::vector<cplx> seg;
    seg.reserve(static_cast<std::size_t>(2 * hw + 1));
    for (long long m = ci - hw; m <= ci + hw; ++m) seg.push_back(at(m));
    // tau origin at the centroid.
    const auto field = normalize(seg, (static_cast<double>(ci - hw) - centroid) * dt, dt, ns);

    out.centers.push_back(centroid * dt);
    try {
      const cplx zeta = find_eigenvalue(field, {0.0, 0.5}, eopt);
      auto p = channel_compensate(zs_scatter(field, zeta, sopt), xi);
      out.points.push_back(p);
      const cplx s = std::conj(p.b / kReferenceB);
      const double mag = std::abs(s);
      out.raw_symbols.push_back(mag > 0.0 && std::isfinite(mag) ? s / mag : cplx(0.0, 0.0));
      out.erased.push_back(mag > 0.0 && std::isfinite(mag) ? 0 : 1);
    } catch (const EigenvalueError&) {
      out.points.push_back({cplx(0.0, 0.0), cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(0.0, 0.0)});
      out.raw_symbols.push_back(cplx(0.0, 0.0));
      out.erased.push_back(1);
    }
    if (out.erased.back()) ++out.n_failures;
  }

  const std::size_t np = std::min(opts.pilot_symbols, pilots.size());
  auto bps = blind_phase_search(out.raw_symbols, opts.bps_test_phases, opts.bps_window,
                                pilots.subspan(0, np));
  out.symbols = std::move(bps.symbols);
  return out;
}

std::array<ChannelReception, kChannels> receive_window(
    const ComplexEnvelope& e, const ChannelPlan& plan, const NormalizationScales& ns,
    std::span<const PulseWindow> windows, double distance_km,
    const std::array<std::vector<cplx>, kChannels>& pilots, const RxOptions& opts) {
  std::array<ChannelReception, kChannels> out;
  for (int k = 0; k < kChannels; ++k)
    out[k] = receive_channel(e, k + 1, plan.delta_f[k], windows, ns, distance_km, pilots[k], opts);
  return out;
}

}  // namespace nlftlink

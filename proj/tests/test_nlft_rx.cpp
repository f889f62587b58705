#include <gtest/gtest.h>
#include <gsl/gsl_sf_gamma.h>

#include <cmath>
#include <random>

#include "nlftlink/fiber_link.hpp"
#include "nlftlink/nlft_rx.hpp"
#include "nlftlink/units.hpp"

using namespace nlftlink;

namespace {

const cplx I(0.0, 1.0);

NormalizedField sech_field(double amp, double h = 0.002, double half = 20.0, double shift = 0.0, cplx phase = 1.0) {
  NormalizedField f;
  const auto n = static_cast<std::size_t>(std::llround(2.0 * half / h)) + 1;
  f.tau_start = -half;
  f.dtau = h;
  f.q.resize(n);
  for (std::size_t j = 0; j < n; ++j) f.q[j] = phase * amp / std::cosh(f.tau(j) - shift);
  return f;
}

cplx lngamma(cplx z) {
  gsl_sf_result lnr;
  gsl_sf_result arg;
  gsl_sf_lngamma_complex_e(z.real(), z.imag(), &lnr, &arg);
  return {lnr.val, arg.val};
}

// a(zeta) for A sech(tau), away from the zeros of a.
cplx satsuma_yajima(double amp, cplx zeta) {
  const cplx base = 0.5 - I * zeta;
  return std::exp(2.0 * lngamma(base) - lngamma(base + amp) - lngamma(base - amp));
}

}  // namespace

TEST(Normalize, Scaling) {
  const NormalizationScales ns{38e-12, 0.9e-3, 670.0};
  const auto g = make_grid(512, 256e9);
  std::vector<cplx> s(g.n_samples());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(0.5 * ns.p_sol) / std::cosh((g.time(i) - 1e-9) / ns.t0);
  const auto q = normalize(ComplexEnvelope(g, s), ns);
  EXPECT_DOUBLE_EQ(q.dtau, g.dt() / ns.t0);
  EXPECT_NEAR(q.q[256].real(), 1.0 / std::sqrt(2.0), 1e-15);
  const auto z = normalize(ComplexEnvelope::zeros(g), ns);
  for (const auto& v : z.q) EXPECT_EQ(v, cplx(0.0));
  EXPECT_THROW(normalize(ComplexEnvelope::zeros(g), NormalizationScales{0.0, 1e-3, 1.0}), std::invalid_argument);
}

TEST(ZsScatter, FreeScattering) {
  NormalizedField f;
  f.tau_start = -5.0;
  f.dtau = 0.01;
  f.q.assign(1001, 0.0);
  for (cplx z : {cplx(0.3, 0.1), cplx(-1.0, 0.5), cplx(0.0, 2.0)}) EXPECT_NEAR(std::abs(zs_scatter(f, z).a - 1.0), 0.0, 1e-10);
}

TEST(ZsScatter, SatsumaYajima) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> re(-1.5, 1.5);
  std::uniform_real_distribution<double> im(0.05, 1.2);
  for (double amp : {0.8, 1.0, 1.4, 2.2}) {
    const auto f = sech_field(amp);
    for (int k = 0; k < 10; ++k) {
      const cplx z(re(rng), im(rng));
      EXPECT_NEAR(std::abs(zs_scatter(f, z).a - satsuma_yajima(amp, z)), 0.0, 1e-6) << amp << " " << z;
    }
  }
}

TEST(ZsScatter, EdgeCheck) {
  const auto f = sech_field(1.0, 0.01, 5.0);  // |q| ~ 1.3e-2 at the edges
  EXPECT_THROW(zs_scatter(f, {0.0, 0.5}), ScatteringError);
  ScatterOptions loose;
  loose.edge_tolerance = 0.1;
  EXPECT_NO_THROW(zs_scatter(f, {0.0, 0.5}, loose));
}

TEST(ZsTransfer, UnimodularAndMultiplicative) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<cplx> q(200);
    for (auto& v : q) v = {n01(rng), n01(rng)};
    const cplx z(n01(rng), std::abs(n01(rng)));
    const double h = 0.02;
    const auto t = zs_transfer(q, h, z);
    const std::size_t cut = 1 + static_cast<std::size_t>(rng() % 198);
    const auto l = zs_transfer(std::span<const cplx>(q).subspan(0, cut), h, z);
    const auto r = zs_transfer(std::span<const cplx>(q).subspan(cut), h, z);
    const Transfer p{r[0] * l[0] + r[1] * l[2], r[0] * l[1] + r[1] * l[3], r[2] * l[0] + r[3] * l[2],
                     r[2] * l[1] + r[3] * l[3]};
    double scale = 0.0;
    for (const auto& v : t) scale = std::max(scale, std::abs(v));
    EXPECT_LT(std::abs(t[0] * t[3] - t[1] * t[2] - 1.0), 1e-12 * std::max(1.0, scale * scale));
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(p[k] - t[k]) / scale, 0.0, 1e-10);
  }
}

TEST(ZsScatter, RectangularBox) {
  const double amp = 1.3;
  const double len = 2.0;
  NormalizedField f;
  f.dtau = 0.01;
  f.tau_start = 0.005;
  f.q.assign(200, amp);
  ScatterOptions so;
  so.edge_tolerance = std::numeric_limits<double>::infinity();
  for (cplx z : {cplx(0.1, 0.3), cplx(1.5, 0.1)}) {
    const cplx k = std::sqrt(z * z + amp * amp);
    const cplx ref = (std::cos(k * len) - I * z * std::sin(k * len) / k) * std::exp(I * z * len);
    EXPECT_NEAR(std::abs(zs_scatter(f, z, so).a - ref), 0.0, 1e-10);
  }
}

TEST(Eigenvalue, SatsumaYajimaLowest) {
  for (double amp : {0.8, 1.0, 1.4}) EXPECT_NEAR(std::abs(find_eigenvalue(sech_field(amp)) - cplx(0.0, amp - 0.5)), 0.0, 1e-6);
  EXPECT_THROW(find_eigenvalue(sech_field(0.4)), EigenvalueError);
}

TEST(Eigenvalue, PhaseAndShiftCovariance) {
  const auto f0 = sech_field(1.0);
  const cplx z = find_eigenvalue(f0);
  const auto p0 = zs_scatter(f0, z);
  EXPECT_NEAR(std::abs(p0.b - kReferenceB), 0.0, 1e-6);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> th(-kPi, kPi);
  std::uniform_real_distribution<double> sh(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const double theta = th(rng);
    const double tau0 = sh(rng);
    const auto f = sech_field(1.0, 0.002, 20.0, tau0, std::polar(1.0, theta));
    const cplx zk = find_eigenvalue(f);
    EXPECT_NEAR(std::abs(zk - z), 0.0, 1e-8);
    ScatterOptions so;
    so.matching_tau = 0.0;
    const auto p = zs_scatter(f, zk, so);
    const cplx expect = p0.b * std::polar(1.0, -theta) * std::exp(-2.0 * I * zk * tau0);
    EXPECT_NEAR(std::abs(p.b - expect) / std::abs(expect), 0.0, 1e-6);
  }
}

TEST(Compensation, Convention) {
  const NlftPoint p{{0.0, 0.5}, 0.0, {0.2, 0.7}, {0.2, 0.7}};
  const auto same = channel_compensate(p, 0.0);
  EXPECT_EQ(same.b, p.b);
  // b(xi) = b(0) exp(2 i zeta^2 xi) is undone by exp(-2 i zeta^2 xi).
  EXPECT_NEAR(std::abs(compensation_multiplier({0.0, 0.5}, 1.0) - std::exp(cplx(0.0, 0.5))), 0.0, 1e-15);
  const cplx z(0.3, 0.4);
  EXPECT_NEAR(std::abs(compensation_multiplier(z, 2.5) - std::exp(-2.0 * I * z * z * 2.5)), 0.0, 1e-15);
  EXPECT_EQ(channel_compensate(p, 3.0).a, p.a);
}

TEST(Compensation, SolitonPhaseAfterPropagation) {
  FiberParams fp;
  fp.alpha_db_per_km = 0.0;
  const double t0 = 38e-12;
  const double p0 = soliton_power(fp, t0);
  const auto g = make_grid(2048, 128e9);
  const double tc = 0.5 * g.duration();
  std::vector<cplx> s(g.n_samples());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(p0) / std::cosh((g.time(i) - tc) / t0);
  const NormalizationScales ns{t0, p0, dispersion_length_km(fp, t0)};
  const auto out = ssfm_propagate(ComplexEnvelope(g, s), fp, StepControl::adaptive(1e-4), 1000.0);
  auto q = normalize(out.samples(), -tc, g.dt(), ns);
  ScatterOptions so;
  so.matching_tau = 0.0;
  const auto p = zs_scatter(q, find_eigenvalue(q), so);
  const auto c = channel_compensate(p, 1000.0 / ns.l_d_km);
  EXPECT_NEAR(std::abs(std::remainder(std::arg(c.b) - std::arg(kReferenceB), 2.0 * kPi)), 0.0, 1e-2);
  EXPECT_GT(std::abs(std::remainder(std::arg(p.b) - std::arg(kReferenceB), 2.0 * kPi)), 0.1);
}

TEST(Demux, SingleChannelAndCrosstalk) {
  const auto g = make_grid(1024, 256e9);
  const auto tone = [&](double f, double amp) {
    return frequency_shift(ComplexEnvelope(g, std::vector<cplx>(g.n_samples(), amp)), f);
  };
  const auto base = demux(tone(0.0, 1.0), 0.0, 9e9, 4);
  EXPECT_NEAR(average_power(base), 1.0, 1e-12);

  auto both = tone(5e9, 1.0);
  both += tone(15e9, 1.0);
  const auto ch = demux(both, 5e9, 9e9, 4);
  // The 5 GHz channel lands on DC; everything else is the neighbour at +10 GHz.
  const auto p = power_spectrum(ch);
  const double own = p[0];
  double rest = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) rest += p[k];
  const double xt_db = 10.0 * std::log10(rest / own);
  const double formula = -10.0 * std::log10(1.0 + std::pow(2.0 * 10e9 / 9e9, 8));
  EXPECT_NEAR(xt_db, formula, 0.5);
}

TEST(Bps, CleanAndConstantOffset) {
  std::mt19937_64 rng(6);
  std::vector<cplx> s(400);
  for (auto& v : s) v = std::polar(1.0, kPi / 4 + kPi / 2 * static_cast<double>(rng() % 4));
  const auto clean = blind_phase_search(s, 32, 65, std::span<const cplx>(s).subspan(0, 8));
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(std::abs(clean.symbols[k] - s[k]), 0.0, 1e-12);

  std::vector<cplx> r(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) r[k] = s[k] * std::polar(1.0, kPi / 8);
  const auto rot = blind_phase_search(r, 32, 65, std::span<const cplx>(s).subspan(0, 8));
  for (double ph : rot.phase) EXPECT_NEAR(ph, kPi / 8, kPi / (2 * 32));
  for (std::size_t k = 0; k < s.size(); ++k) EXPECT_EQ(qpsk_decide(rot.symbols[k]), qpsk_decide(s[k]));
}

TEST(Bps, WienerNoiseBeatsNoCorrection) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    std::normal_distribution<double> n01;
    const std::size_t n = 10000;
    std::vector<cplx> tx(n);
    std::vector<cplx> rx(n);
    double phi = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      tx[k] = std::polar(1.0, kPi / 4 + kPi / 2 * static_cast<double>(rng() % 4));
      phi += std::sqrt(1e-3) * n01(rng);
      rx[k] = tx[k] * std::polar(1.0, phi) + 0.1 * cplx(n01(rng), n01(rng));
    }
    const auto out = blind_phase_search(rx, 32, 65, std::span<const cplx>(tx).subspan(0, 16));
    std::size_t err_bps = 0;
    std::size_t err_raw = 0;
    for (std::size_t k = 0; k < n; ++k) {
      err_bps += qpsk_demap(out.symbols[k]) != qpsk_demap(tx[k]);
      err_raw += qpsk_demap(rx[k]) != qpsk_demap(tx[k]);
    }
    EXPECT_LT(err_bps, err_raw) << seed;
  }
}

TEST(BerCount, Arithmetic) {
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> bits(4000);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
  const auto sym = qpsk_map(bits);
  EXPECT_EQ(decide_and_count(sym, bits).ber, 0.0);
  auto flipped = bits;
  flipped[1234] ^= 1u;
  EXPECT_DOUBLE_EQ(decide_and_count(sym, flipped).ber, 2.5e-4);
  std::vector<std::uint8_t> erased(sym.size(), 0);
  erased[7] = 1;
  EXPECT_DOUBLE_EQ(decide_and_count(sym, bits, erased, 0.5).n_errors, 1.0);
}

TEST(BerCount, QpskAwgnMatchesErfc) {
  const double esn0 = std::pow(10.0, 0.7);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n01;
  std::vector<std::uint8_t> bits(400000);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
  auto sym = qpsk_map(bits);
  const double sigma = std::sqrt(0.5 / esn0);
  for (auto& s : sym) s += sigma * cplx(n01(rng), n01(rng));
  const double p = 0.5 * std::erfc(std::sqrt(esn0 / 2.0));
  const double sd = std::sqrt(p * (1 - p) / static_cast<double>(bits.size()));
  EXPECT_NEAR(decide_and_count(sym, bits).ber, p, 3.0 * sd);
}

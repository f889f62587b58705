#include <gtest/gtest.h>
#include <gsl/gsl_cdf.h>

#include <cmath>
#include <random>

#include "nlftlink/signal_core.hpp"
#include "nlftlink/units.hpp"

using namespace nlftlink;

namespace {

ComplexEnvelope sech(const SignalGrid& g, double p0, double t0, double tc) {
  std::vector<cplx> s(g.n_samples());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(p0) / std::cosh((g.time(i) - tc) / t0);
  return ComplexEnvelope(g, std::move(s));
}

std::vector<cplx> random_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<cplx> x(n);
  for (auto& v : x) v = {n01(rng), n01(rng)};
  return x;
}

std::size_t argmax_bin(const ComplexEnvelope& e) {
  const auto p = power_spectrum(e);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

TEST(SignalGrid, Duration) {
  EXPECT_DOUBLE_EQ(make_grid(1024, 512e9).duration(), 2e-9);
  EXPECT_DOUBLE_EQ(make_grid(2, 1e9).duration(), 2e-9);
  EXPECT_THROW(make_grid(1, 1e9), std::invalid_argument);
  EXPECT_THROW(make_grid(16, 0.0), std::invalid_argument);
}

TEST(SignalGrid, NyquistBinIsNegative) {
  const auto g = make_grid(8, 8.0);
  EXPECT_DOUBLE_EQ(g.frequency(4), -4.0);
  EXPECT_DOUBLE_EQ(g.frequency(3), 3.0);
  EXPECT_DOUBLE_EQ(g.frequency(7), -1.0);
}

TEST(AveragePower, TrivialCases) {
  const auto g = make_grid(64, 64e9);
  EXPECT_EQ(average_power(ComplexEnvelope::zeros(g)), 0.0);
  EXPECT_DOUBLE_EQ(average_power(ComplexEnvelope(g, std::vector<cplx>(64, 1.0))), 1.0);
}

TEST(AveragePower, SechPulseMatchesIntegral) {
  const double t0 = 38e-12;
  const double tw = 1e-9;
  const auto g = make_grid(1024, 1024e9);
  const auto e = sech(g, 2e-3, t0, 0.5 * tw);
  EXPECT_NEAR(average_power(e) / (2.0 * 2e-3 * t0 / tw), 1.0, 1e-6);
}

TEST(AveragePower, WindowSelectsSamples) {
  const auto g = make_grid(8, 8.0);
  std::vector<cplx> s{1, 1, 2, 2, 0, 0, 0, 0};
  const ComplexEnvelope e(g, s);
  EXPECT_DOUBLE_EQ(average_power(e, TimeInterval{0.25, 0.5}), 4.0);
  EXPECT_DOUBLE_EQ(average_power(e, TimeInterval{0.0, 0.5}), 2.5);
}

TEST(PeakPower, SampledSechPeak) {
  const auto g = make_grid(256, 256e9);
  EXPECT_EQ(peak_power(ComplexEnvelope::zeros(g)), 0.0);
  const auto e = sech(g, 1.5e-3, 38e-12, g.time(100));
  EXPECT_NEAR(peak_power(e), 1.5e-3, 1e-18);
}

TEST(PeakPower, OverlappingPulsesAgainstDenseGrid) {
  const double t0 = 38e-12;
  const auto g = make_grid(8192, 2.0 / t0 * 100.0 / 2.0);  // T0 / 100 spacing
  const double tc = 0.5 * g.duration();
  std::vector<cplx> s(g.n_samples());
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = 1.0 / std::cosh((g.time(i) - tc - t0) / t0) + 1.0 / std::cosh((g.time(i) - tc + t0) / t0);
  const double grid_peak = peak_power(ComplexEnvelope(g, s));
  double dense = 0.0;
  for (double x = -3.0; x <= 3.0; x += 1e-5) dense = std::max(dense, std::pow(1.0 / std::cosh(x - 1) + 1.0 / std::cosh(x + 1), 2));
  EXPECT_GT(grid_peak, 1.0);
  EXPECT_NEAR(grid_peak / dense, 1.0, 1e-3);
}

TEST(Parseval, RandomEnvelopes) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t n = 64 + 38 * seed;
    const auto g = make_grid(n, 100e9);
    const ComplexEnvelope e(g, random_samples(n, seed));
    double spec = 0.0;
    for (double p : power_spectrum(e)) spec += p;
    spec *= g.dt() / static_cast<double>(n);
    EXPECT_NEAR(spec / e.energy(), 1.0, 1e-12) << "n = " << n;
  }
}

TEST(FrequencyShift, IdentityAndOneBin) {
  const auto g = make_grid(512, 256e9);
  const auto e = sech(g, 1e-3, 38e-12, 1e-9);
  const auto same = frequency_shift(e, 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(same.samples()[i], e.samples()[i]);

  const auto tone = ComplexEnvelope(g, std::vector<cplx>(g.n_samples(), 1.0));
  const auto moved = frequency_shift(tone, g.bin_width());
  EXPECT_EQ(argmax_bin(moved), 1u);
  EXPECT_DOUBLE_EQ(moved.center_offset(), g.bin_width());
}

TEST(FrequencyShift, SechCentroid) {
  const auto g = make_grid(2048, 256e9);
  const auto e = sech(g, 1e-3, 38e-12, 4e-9);
  const auto s = frequency_shift(e, 5e9);
  EXPECT_NEAR(spectral_centroid(s), 5e9, g.bin_width());
}

TEST(FrequencyShift, GuardRejectsAliasing) {
  const auto g = make_grid(256, 64e9);
  const auto e = sech(g, 1e-3, 38e-12, 2e-9);
  EXPECT_THROW(frequency_shift(e, 30e9), std::invalid_argument);
  EXPECT_NO_THROW(frequency_shift(e, 30e9, ShiftGuard::wrap));
}

TEST(Delay, IntegerSamplesRotate) {
  const std::size_t n = 128;
  const auto g = make_grid(n, 128e9);
  const ComplexEnvelope e(g, random_samples(n, 3));
  for (int k : {0, 1, 5, 127}) {
    const auto d = delay(e, k * g.dt());
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(std::abs(d.samples()[(i + k) % n] - e.samples()[i]), 0.0, 1e-12);
  }
}

TEST(Delay, ZeroPadDropsWrappedPart) {
  const auto g = make_grid(16, 16.0);
  std::vector<cplx> s(16, 0.0);
  s[14] = 1.0;
  const auto d = delay(ComplexEnvelope(g, s), 0.25, DelayMode::zero_pad);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(std::abs(d.samples()[i]), 0.0, 1e-12);
}

TEST(Delay, HalfSampleMatchesDirichletInterpolation) {
  const std::size_t n = 200;
  const auto g = make_grid(n, 200e9);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  std::vector<cplx> x(n);
  for (int m = -30; m <= 30; ++m) {
    const cplx c(n01(rng), n01(rng));
    for (std::size_t i = 0; i < n; ++i) x[i] += c * std::polar(1.0, 2.0 * kPi * m * double(i) / double(n));
  }
  const auto d = delay(ComplexEnvelope(g, x), 0.5 * g.dt());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cplx ref = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double u = double(i) - 0.5 - double(j);
      ref += x[j] * std::sin(kPi * u) / (double(n) * std::tan(kPi * u / double(n)));
    }
    num += std::norm(d.samples()[i] - ref);
    den += std::norm(ref);
  }
  EXPECT_LT(std::sqrt(num / den), 1e-9);
}

TEST(PowerBandwidth, BrickWall) {
  const std::size_t n = 1024;
  const auto g = make_grid(n, 1024e9);
  std::vector<cplx> spec(n, 0.0);
  const int half = 100;  // 201 bins
  for (int k = -half; k <= half; ++k) spec[static_cast<std::size_t>((k + int(n)) % int(n))] = 1.0;
  ifft_inplace(spec);
  const ComplexEnvelope e(g, spec);
  const double b = 201 * g.bin_width();
  for (double f : {0.5, 0.9, 0.99}) EXPECT_NEAR(power_bandwidth(e, f), f * b, g.bin_width()) << f;
}

TEST(PowerBandwidth, GaussianAgainstErfOracle) {
  const double tg = 20e-12;
  const auto g = make_grid(4096, 512e9);
  const double tc = 0.5 * g.duration();
  std::vector<cplx> s(g.n_samples());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = g.time(i) - tc;
    s[i] = std::exp(-t * t / (2.0 * tg * tg));
  }
  const double sigma = 1.0 / (2.0 * std::sqrt(2.0) * kPi * tg);
  const double expect = 2.0 * gsl_cdf_ugaussian_Pinv(0.995) * sigma;
  EXPECT_NEAR(power_bandwidth(ComplexEnvelope(g, s), 0.99), expect, g.bin_width());
}

TEST(Butterworth, ThreeDbPoint) {
  for (int order : {1, 2, 4}) {
    EXPECT_NEAR(butterworth_power_gain(4.5e9, order, 9e9, 0.0, 0.0), 0.5, 1e-15);
    EXPECT_NEAR(butterworth_power_gain(0.0, order, 9e9, 0.0, 1.0), db_to_linear(-1.0), 1e-15);
  }
}

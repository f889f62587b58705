#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nlftlink/fiber_link.hpp"
#include "nlftlink/units.hpp"

using namespace nlftlink;

namespace {

constexpr double kT0 = 38e-12;

FiberParams lossless() {
  FiberParams fp;
  fp.alpha_db_per_km = 0.0;
  return fp;
}

ComplexEnvelope sech(const SignalGrid& g, double p0, double t0) {
  std::vector<cplx> s(g.n_samples());
  const double tc = 0.5 * g.duration();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(p0) / std::cosh((g.time(i) - tc) / t0);
  return ComplexEnvelope(g, std::move(s));
}

double rel_l2(const ComplexEnvelope& a, const ComplexEnvelope& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a.samples()[i] - b.samples()[i]);
    den += std::norm(b.samples()[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST(SolitonCondition, PowerForLaunchOperatingPoint) {
  FiberParams fp;
  fp.beta2_ps2_per_km = -1.6 * 0.933e-3 * 38.0 * 38.0;
  EXPECT_NEAR(std::abs(fp.beta2_ps2_per_km), 2.16, 0.01);
  EXPECT_NEAR(soliton_power(fp, kT0), 0.933e-3, 1e-12);
  fp.gamma_per_w_km = 0.0;
  EXPECT_THROW(soliton_power(fp, kT0), std::invalid_argument);
  fp.gamma_per_w_km = 1.6;
  fp.beta2_ps2_per_km = 1.0;
  EXPECT_THROW(soliton_power(fp, kT0), std::invalid_argument);
}

TEST(SolitonCondition, GuidingCenter) {
  FiberParams fp;
  const double al = alpha_db_to_neper(0.2) * 50.0;
  EXPECT_NEAR(path_average_factor(fp), (1.0 - std::exp(-al)) / al, 1e-15);
  const double b2 = guiding_center_beta2(fp, 0.933e-3, kT0);
  fp.beta2_ps2_per_km = b2;
  EXPECT_NEAR(soliton_power(fp, kT0), path_average_factor(fp) * 0.933e-3, 1e-15);
}

TEST(Ssfm, ZeroFieldStaysZero) {
  const auto g = make_grid(256, 128e9);
  const auto out = ssfm_propagate(ComplexEnvelope::zeros(g), FiberParams{}, StepControl::adaptive(1e-3), 50.0);
  for (const auto& s : out.samples()) EXPECT_EQ(s, cplx(0.0));
}

TEST(Ssfm, LossOnly) {
  FiberParams fp;
  fp.beta2_ps2_per_km = 0.0;
  fp.gamma_per_w_km = 0.0;
  const auto g = make_grid(128, 128e9);
  const auto in = sech(g, 1e-3, kT0);
  const auto out = ssfm_span(in, fp, StepControl::fixed(5.0));
  EXPECT_NEAR(out.energy() / in.energy(), db_to_linear(-10.0), 1e-12);
}

TEST(Ssfm, ChirpedGaussian) {
  FiberParams fp = lossless();
  fp.gamma_per_w_km = 0.0;
  const auto g = make_grid(4096, 256e9);
  const double tc = 0.5 * g.duration();
  const double t0 = 25e-12;
  std::vector<cplx> x(g.n_samples());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::exp(-std::pow(g.time(i) - tc, 2) / (2 * t0 * t0));
  for (double z : {100.0, 1000.0, 3000.0}) {
    const auto out = ssfm_propagate(ComplexEnvelope(g, x), fp, StepControl::fixed(z / 3.0), z);
    const cplx q = cplx(t0 * t0, -fp.beta2_s2_per_km() * z);
    std::vector<cplx> ref(x.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = t0 / std::sqrt(q) * std::exp(-std::pow(g.time(i) - tc, 2) / (2.0 * q));
    EXPECT_LT(rel_l2(out, ComplexEnvelope(g, ref)), 1e-3) << z;
  }
}

TEST(Ssfm, FundamentalSolitonKeepsShape) {
  const FiberParams fp = lossless();
  const auto g = make_grid(1024, 128e9);
  const auto in = sech(g, soliton_power(fp, kT0), kT0);
  const double z = 20.0 * dispersion_length_km(fp, kT0);
  const auto out = ssfm_propagate(in, fp, StepControl::adaptive(1e-3), z);
  EXPECT_NEAR(peak_power(out) / peak_power(in), 1.0, 0.01);
  // |A| unchanged up to the soliton phase.
  std::vector<cplx> mag_in(in.size());
  std::vector<cplx> mag_out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    mag_in[i] = std::abs(in.samples()[i]);
    mag_out[i] = std::abs(out.samples()[i]);
  }
  EXPECT_LT(rel_l2(ComplexEnvelope(g, mag_out), ComplexEnvelope(g, mag_in)), 0.01);
}

TEST(Ssfm, SecondOrderConvergence) {
  const FiberParams fp = lossless();
  const auto g = make_grid(1024, 128e9);
  const auto in = sech(g, 2.25 * soliton_power(fp, kT0), kT0);
  const double z = dispersion_length_km(fp, kT0);
  const auto ref = ssfm_propagate(in, fp, StepControl::fixed(z / 8192), z);
  double prev = 0.0;
  for (int n : {128, 256, 512}) {
    const double err = rel_l2(ssfm_propagate(in, fp, StepControl::fixed(z / n), z), ref);
    if (prev > 0.0) {
      EXPECT_GE(prev / err, 3.9) << n;
    }
    prev = err;
  }
}

TEST(Ssfm, LosslessPropagationConservesEnergy) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  const auto g = make_grid(512, 128e9);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<cplx> x(g.n_samples());
    for (auto& v : x) v = 0.02 * cplx(n01(rng), n01(rng));
    const ComplexEnvelope in(g, x);
    const auto out = ssfm_propagate(in, lossless(), StepControl::adaptive(5e-3), 200.0);
    EXPECT_NEAR(out.energy() / in.energy(), 1.0, 1e-10);
  }
}

TEST(Ssfm, RejectsTooLargeNonlinearStep) {
  const auto g = make_grid(256, 128e9);
  const auto in = sech(g, 1.0, kT0);
  EXPECT_THROW(ssfm_span(in, FiberParams{}, StepControl::fixed(10.0)), StepControlError);
}

TEST(Edfa, AsePsdFormula) {
  const EdfaParams ep{10.0, 5.0, false};
  EXPECT_NEAR(ase_psd(ep, OpticalConstants{}) / 1.96e-18, 1.0, 0.005);
  EXPECT_LT(ase_psd({10.0, 3.01, false}, OpticalConstants{}), ase_psd(ep, OpticalConstants{}));
  EXPECT_EQ(ase_psd({10.0, 5.0, true}, OpticalConstants{}), 0.0);
}

TEST(Edfa, NoiseVarianceAndDeterminism) {
  const auto g = make_grid(1 << 16, 256e9);
  const EdfaParams ep{10.0, 5.0, false};
  const auto a = edfa_amplify(ComplexEnvelope::zeros(g), ep, OpticalConstants{}, 5);
  const auto b = edfa_amplify(ComplexEnvelope::zeros(g), ep, OpticalConstants{}, 5);
  for (std::size_t i = 0; i < a.envelope.size(); ++i) ASSERT_EQ(a.envelope.samples()[i], b.envelope.samples()[i]);
  // Noise power over the simulated band is rho * fs.
  EXPECT_NEAR(average_power(a.envelope) / (a.ase_psd * g.sample_rate()), 1.0, 0.02);
}

TEST(Link, ZeroSpansIsIdentity) {
  const auto g = make_grid(128, 128e9);
  const auto in = sech(g, 1e-3, kT0);
  const auto out = propagate_link(in, 0, FiberParams{}, EdfaParams{}, StepControl{}, 1);
  EXPECT_EQ(out.accumulated_ase_psd, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out.envelope.samples()[i], in.samples()[i]);
}

TEST(Link, AseAccumulatesLinearly) {
  FiberParams fp;
  fp.gamma_per_w_km = 0.0;
  const auto g = make_grid(64, 64e9);
  const EdfaParams ep{fp.span_loss_db(), 5.0, false};
  const double rho = ase_psd(ep, OpticalConstants{});
  std::vector<double> seen;
  const auto out = propagate_link(ComplexEnvelope::zeros(g), 75, fp, ep, StepControl::fixed(25.0), 3, {},
                                  [&](int, const ComplexEnvelope&, double ase) { seen.push_back(ase); });
  ASSERT_EQ(seen.size(), 75u);
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_NEAR(seen[i] / ((i + 1) * rho), 1.0, 1e-12);
  EXPECT_NEAR(out.accumulated_ase_psd / (75.0 * rho), 1.0, 1e-12);
}

TEST(Link, GainMustMatchSpanLoss) {
  const auto g = make_grid(64, 64e9);
  EXPECT_THROW(propagate_link(ComplexEnvelope::zeros(g), 1, FiberParams{}, EdfaParams{9.0, 5.0, false}, StepControl{}, 1),
               std::invalid_argument);
}

TEST(Link, NoiselessGuidingCenterSoliton) {
  FiberParams fp;
  const double launch = 0.933e-3;
  fp.beta2_ps2_per_km = guiding_center_beta2(fp, launch, kT0);
  const EdfaParams ep{fp.span_loss_db(), 5.0, true};
  const auto g = make_grid(1024, 128e9);
  const auto out = propagate_link(sech(g, launch, kT0), 20, fp, ep, StepControl::adaptive(1e-3), 1);
  EXPECT_NEAR(watt_to_dbm(peak_power(out.envelope)), watt_to_dbm(launch), 1.5);
}

TEST(Osnr, DefinitionAndDoubling) {
  const auto g = make_grid(64, 64e9);
  const ComplexEnvelope sig(g, std::vector<cplx>(64, std::sqrt(1e-3)));
  EXPECT_TRUE(std::isinf(osnr_estimate(sig, 0.0)));
  EXPECT_NEAR(osnr_estimate(sig, 1e-18), 10.0 * std::log10(1e-3 / (2e-18 * 12.5e9)), 1e-12);
  for (int n : {1, 5, 37})
    EXPECT_NEAR(osnr_estimate(sig, n * 1e-18) - osnr_estimate(sig, 2 * n * 1e-18), 10.0 * std::log10(2.0), 1e-12);
}

TEST(FieldRecord, RoundTrip) {
  const auto g = make_grid(32, 32e9);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<cplx> x(32);
  for (auto& v : x) v = {n01(rng), n01(rng)};
  std::stringstream ss;
  write_field_record(ss, ComplexEnvelope(g, x), 17);
  EXPECT_EQ(ss.str().size(), 8u + 8u + 8u + 32u * 16u);
  const auto r = read_field_record(ss);
  EXPECT_EQ(r.span_index, 17u);
  EXPECT_EQ(r.envelope.grid(), g);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(r.envelope.samples()[i], x[i]);
}

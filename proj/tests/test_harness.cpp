#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nlftlink/harness.hpp"
#include "nlftlink/rng.hpp"
#include "nlftlink/units.hpp"

using namespace nlftlink;

namespace {

ScenarioConfig small(std::vector<double> distances, std::vector<std::uint64_t> seeds = {1}) {
  auto cfg = default_config();
  cfg.n_bits = 64;
  cfg.distances_km = std::move(distances);
  cfg.seeds = std::move(seeds);
  cfg.finalize();
  return cfg;
}

std::string csv(const RunResult& r) {
  std::ostringstream os;
  write_results_csv(os, r.rows);
  return os.str();
}

ResultRow row(double d, double ber, std::uint64_t seed = 1) {
  ResultRow r;
  r.distance_km = d;
  r.seed = seed;
  r.ber_avg = ber;
  return r;
}

}  // namespace

TEST(Harness, BackToBackNoiselessIsErrorFree) {
  auto cfg = default_config();
  const auto bits = seed_bits(cfg, 1);
  const auto launch = launch_block(cfg, bits, derive_seed(cfg.master_seed, {1}), true);
  const auto p = evaluate_reception(cfg, launch.launched, launch.tx, 0.0);
  for (int k = 0; k < kChannels; ++k) EXPECT_EQ(p.n_errors[k], 0.0) << "channel " << k + 1;
  EXPECT_EQ(p.n_failures, 0u);
}

TEST(Harness, BackToBackAt30dbOsnr) {
  auto cfg = default_config();
  const auto bits = seed_bits(cfg, 2);
  const auto launch = launch_block(cfg, bits, derive_seed(cfg.master_seed, {2}), true);
  auto noisy = launch.launched;
  const double rho = launch.signal_power / (2.0 * cfg.osnr_ref_bandwidth * 1e3);
  const double sigma = std::sqrt(0.5 * rho * noisy.grid().sample_rate());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (auto& s : noisy.mutable_samples()) s += sigma * cplx(n01(rng), n01(rng));
  EXPECT_NEAR(osnr_estimate(launch.launched, rho), 30.0, 1e-9);
  EXPECT_LT(evaluate_reception(cfg, noisy, launch.tx, 0.0).ber_avg(), 1e-4);
}

TEST(Harness, RowCountAndOrder) {
  auto cfg = small({}, {1});
  cfg.distances_km.clear();
  cfg.finalize();
  const auto r = run_scenario(cfg);
  ASSERT_EQ(r.rows.size(), 75u);
  for (std::size_t i = 0; i < r.rows.size(); ++i) EXPECT_DOUBLE_EQ(r.rows[i].distance_km, 50.0 * (i + 1));
  for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_LT(r.rows[i].osnr_db, r.rows[i - 1].osnr_db);
}

TEST(Harness, DeterministicAcrossRunsAndThreads) {
  auto cfg = small({50, 100, 150}, {1, 2, 3});
  cfg.threads = 1;
  const auto a = csv(run_scenario(cfg));
  const auto b = csv(run_scenario(cfg));
  cfg.threads = 3;
  const auto c = csv(run_scenario(cfg));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  cfg.master_seed += 1;
  EXPECT_NE(a, csv(run_scenario(cfg)));
}

TEST(Harness, SegmentedBlocks) {
  auto cfg = small({50, 100});
  cfg.n_bits = 256;  // 32 windows
  cfg.max_grid_samples = 8 * 256;
  cfg.finalize();
  EXPECT_EQ(segment_count(cfg), 4u);
  const auto r = run_scenario(cfg);
  EXPECT_EQ(r.n_segments, 4u);
  EXPECT_EQ(r.rows.size(), 2u);
  const auto truth = transmitted_truth(cfg, 1);
  EXPECT_EQ(truth[0].symbols.size(), 32u);
  for (std::size_t k = 1; k < truth[0].centers.size(); ++k)
    EXPECT_NEAR(truth[0].centers[k] - truth[0].centers[k - 1], cfg.plan.tw, 1e-15);
}

TEST(Harness, DiagnosticsRecordPerSymbol) {
  auto cfg = small({50, 100});
  RunOptions ro;
  ro.diagnostics_distance_km = 100.0;
  const auto r = run_scenario(cfg, ro);
  EXPECT_EQ(r.diagnostics.size(), 4u * (cfg.n_bits / 8));
  for (const auto& d : r.diagnostics) EXPECT_NEAR(d.zeta.imag(), 0.5, 0.05);
  ro.diagnostics_distance_km = 75.0;
  EXPECT_THROW(run_scenario(cfg, ro), ConfigError);
}

TEST(Summary, ReachAndRipples) {
  auto cfg = small({50});
  cfg.n_bits = 40000;
  const std::vector<ResultRow> rows{row(500, 1e-4), row(1000, 2e-3), row(1500, 1e-2), row(2000, 5e-3),
                                    row(2500, 3e-2), row(3000, 0.1)};
  const auto s = summarize(cfg, rows);
  EXPECT_DOUBLE_EQ(s.hd_reach_km, 1000.0);
  EXPECT_DOUBLE_EQ(s.sd_reach_km, 2000.0);
  ASSERT_EQ(s.ripples.size(), 1u);
  EXPECT_DOUBLE_EQ(s.ripples[0].distance_km, 2000.0);
  EXPECT_TRUE(s.ripples[0].significant);
}

TEST(Summary, MeanOverSeedsAndZeroReach) {
  auto cfg = small({50});
  const std::vector<ResultRow> rows{row(50, 0.01, 1), row(50, 0.03, 2), row(100, 0.0, 1), row(100, 0.0, 2)};
  const auto s = summarize(cfg, rows);
  EXPECT_NEAR(s.mean_ber[0], 0.02, 1e-15);
  EXPECT_DOUBLE_EQ(s.hd_reach_km, 0.0);
  EXPECT_DOUBLE_EQ(s.sd_reach_km, 100.0);
  EXPECT_GE(s.sd_reach_km, s.hd_reach_km);
}

TEST(Eye, FoldedPeriodicTraceOverlaps) {
  const auto g = make_grid(4096, 256e9);
  const double tw = 1e-9;
  std::vector<cplx> s(g.n_samples());
  std::mt19937_64 rng(1);
  for (int w = 0; w < 16; ++w) {
    const cplx sym = std::polar(1.0, kPi / 4 + kPi / 2 * static_cast<double>(rng() % 4));
    for (std::size_t i = 0; i < s.size(); ++i) {
      double t = g.time(i) - (w + 0.5) * tw;
      t -= g.duration() * std::round(t / g.duration());
      s[i] += sym * 0.03 / std::cosh(t / 38e-12);
    }
  }
  const auto folded = fold_trace(ComplexEnvelope(g, s), tw);
  ASSERT_EQ(folded.size(), g.n_samples());
  const std::size_t per = 256;
  for (std::size_t i = per; i < folded.size(); ++i) {
    EXPECT_NEAR(folded[i].t_fold, folded[i % per].t_fold, 1e-18);
    EXPECT_NEAR(folded[i].magnitude, folded[i % per].magnitude, 1e-6);
  }
}

TEST(Eye, ExportShapes) {
  auto cfg = small({50});
  const auto all = eye_export(cfg, 100.0, 0, EyeFold::dt, 1);
  EXPECT_EQ(all.size(), 8u * 256u);
  for (const auto& e : all) {
    EXPECT_GE(e.t_fold, 0.0);
    EXPECT_LT(e.t_fold, cfg.plan.dt);
  }
  EXPECT_EQ(eye_export(cfg, 0.0, 3, EyeFold::tw, 1).size(), 8u * 256u);
  EXPECT_THROW(eye_export(cfg, 75.0, 1, EyeFold::tw, 1), std::invalid_argument);
  EXPECT_THROW(eye_export(cfg, 50.0, 5, EyeFold::tw, 1), std::invalid_argument);
}

TEST(Records, CsvFormat) {
  ResultRow r = row(250, 1.0 / 3.0);
  r.dt_ps = 250;
  r.ber = {0, 1e-3, 0.5, 2.0 / 3.0};
  r.osnr_db = std::numeric_limits<double>::infinity();
  std::ostringstream os;
  write_results_csv(os, std::vector<ResultRow>{r});
  EXPECT_EQ(os.str(),
            "distance_km,dt_ps,seed,ber_ch1,ber_ch2,ber_ch3,ber_ch4,ber_avg,osnr_db,n_eigenvalue_failures\n"
            "250,250,1,0,0.001,0.5,0.666666667,0.333333333,inf,0\n");
}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nlftlink/config.hpp"
#include "nlftlink/harness.hpp"
#include "nlftlink/link_budget.hpp"
#include "nlftlink/records.hpp"
#include "nlftlink/selftest.hpp"

using namespace nlftlink;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSelftest = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool full = false;
};

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? default_config() : load_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.full) {
    cfg.n_bits = 40000;
    cfg.finalize();
  }
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

// Writes through `write` to `path`, or to stdout when the path is empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
  } else {
    auto f = open_out(path);
    write(f);
  }
}

void print_summary(std::ostream& os, const ScenarioConfig& cfg, const RunResult& r) {
  char line[200];
  std::snprintf(line, sizeof line, "Dt %.0f ps, TW %.0f ps, %zu bits x %zu seeds, %zu block(s)\n", cfg.plan.dt * 1e12,
                cfg.plan.tw * 1e12, cfg.n_bits, cfg.seeds.size(), r.n_segments);
  os << line;
  os << "distance_km  mean_ber\n";
  for (std::size_t i = 0; i < r.summary.distances_km.size(); ++i) {
    std::snprintf(line, sizeof line, "%11.0f  %.4e\n", r.summary.distances_km[i], r.summary.mean_ber[i]);
    os << line;
  }
  std::snprintf(line, sizeof line, "HD-FEC reach (BER <= %.2g): %.0f km\nSD-FEC reach (BER <= %.2g): %.0f km\n",
                cfg.fec.hd, r.summary.hd_reach_km, cfg.fec.sd, r.summary.sd_reach_km);
  os << line;
  for (const auto& rp : r.summary.ripples) {
    std::snprintf(line, sizeof line, "ripple at %.0f km: BER drops by %.3e%s\n", rp.distance_km, rp.drop,
                  rp.significant ? " (significant)" : "");
    os << line;
  }
  if (!r.summary.distances_km.empty() && r.summary.hd_reach_km >= r.summary.distances_km.back())
    os << "note: HD-FEC threshold not crossed within the simulated distances\n";
}

void add_common(CLI::App* app, Common& c, bool with_full) {
  app->add_option("--config", c.config, "JSON scenario file (defaults when omitted)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output file, stdout when omitted");
  if (with_full) app->add_flag("--full", c.full, "40000 bits instead of 4000");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soliton WDM link simulator with NLFT reception"};
  app.require_subcommand(1);

  Common common;

  auto* budget = app.add_subcommand("budget", "transmitter power budget");
  add_common(budget, common, false);
  bool budget_csv = false;
  budget->add_flag("--csv", budget_csv, "CSV instead of a table");

  auto* run = app.add_subcommand("run", "BER versus distance sweep");
  add_common(run, common, true);
  std::string truth_path;
  std::string diag_path;
  std::optional<double> diag_km;
  run->add_option("--truth", truth_path, "write the transmitted symbols of the first seed");
  run->add_option("--diagnostics", diag_path, "write per-symbol NLFT records");
  run->add_option("--diagnostics-km", diag_km, "distance for --diagnostics (default: last distance)");

  auto* eye = app.add_subcommand("eye", "folded |field| trace");
  add_common(eye, common, true);
  double eye_km = 0.0;
  int eye_channel = 0;
  std::string eye_fold = "tw";
  eye->add_option("--distance-km", eye_km, "propagation distance")->required();
  eye->add_option("--channel", eye_channel, "0 for the WDM field, 1..4 for a demultiplexed channel")
      ->check(CLI::Range(0, 4));
  eye->add_option("--fold", eye_fold, "fold period")->check(CLI::IsMember({"dt", "tw"}));

  auto* self = app.add_subcommand("selftest", "run the oracle suite");
  double zs_scale = 1.0;
  self->add_option("--zs-step-scale", zs_scale, "scale the scattering step of the refinement oracle");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*self) {
      SelftestOptions opts;
      opts.zs_step_scale = zs_scale;
      const auto rep = run_selftest(opts);
      print_selftest(std::cout, rep);
      return rep.all_pass() ? 0 : kExitSelftest;
    }

    const auto cfg = load(common);

    if (*budget) {
      const auto b = budget_report(cfg);
      emit(common.out, [&](std::ostream& os) {
        if (budget_csv) write_budget_csv(os, b.report);
        else write_budget_table(os, b.report);
      });
      std::ostream& info = common.out.empty() && budget_csv ? std::cerr : std::cout;
      char line[160];
      std::snprintf(line, sizeof line, "PIC input total %.2f dBm, limit %.1f dBm, margin %.2f dB: %s\n",
                    b.gc.total_dbm, cfg.budget.gc_limit_dbm, b.gc.margin_db, b.gc.pass ? "pass" : "FAIL");
      info << line;
      for (const auto& v : b.report.violations) info << "violation: " << v << '\n';
      return 0;
    }

    if (*run) {
      RunOptions ro;
      if (!diag_path.empty()) ro.diagnostics_distance_km = diag_km ? *diag_km : cfg.distances_km.back();
      const auto r = run_scenario(cfg, ro);
      emit(common.out, [&](std::ostream& os) { write_results_csv(os, r.rows); });
      if (!truth_path.empty()) {
        auto f = open_out(truth_path);
        write_truth_csv(f, transmitted_truth(cfg, cfg.seeds.front()));
      }
      if (!diag_path.empty()) {
        auto f = open_out(diag_path);
        write_diagnostics_csv(f, r.diagnostics);
      }
      print_summary(common.out.empty() ? std::cerr : std::cout, cfg, r);
      return 0;
    }

    if (*eye) {
      const auto samples = eye_export(cfg, eye_km, eye_channel, eye_fold == "dt" ? EyeFold::dt : EyeFold::tw,
                                      cfg.seeds.front());
      emit(common.out, [&](std::ostream& os) { write_eye_csv(os, samples); });
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

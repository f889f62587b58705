#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlftlink/fiber_link.hpp"
#include "nlftlink/link_budget.hpp"
#include "nlftlink/nlft_rx.hpp"
#include "nlftlink/tx_pic.hpp"

namespace nlftlink {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FecThresholds {
  double hd = 3.8e-3;
  double sd = 2.0e-2;
};

struct BudgetConfig {
  double source_power_dbm = 6.0;  // per comb line
  int n_lines = 4;
  std::vector<ComponentSpec> chain = reference_tx_chain();
  std::vector<SafetyConstraint> constraints = reference_constraints();
  std::string gc_stage = "gc_in";
  double gc_limit_dbm = 16.0;
  double gc_tolerance_db = 0.05;
};

struct ScenarioConfig {
  std::size_t n_bits = 4000;
  TxMode mode = TxMode::idealized;
  double launch_peak_dbm = -0.3;
  std::vector<double> distances_km;  // filled with every span up to 3750 km when empty
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::uint64_t master_seed = 20240601;
  double sample_rate = 256e9;

  ChannelPlan plan;
  bool solve_timing = true;  // derive tau_wg / tau_awg from Dt and TW
  SolitonParams soliton;
  MzmParams mzm;
  // Drive gain calibrated so the modulator costs this much peak power
  // (carrier to pulse peak); unset keeps mzm.drive_gain.
  std::optional<double> mzm_penalty_db = 13.5;
  TxHardware tx;

  FiberParams fiber;
  // How beta2 follows from the launch peak when not given explicitly:
  // `soliton` makes the launch peak the fundamental-soliton power,
  // `path-average` makes it the span-averaged (guiding-center) one.
  enum class Beta2Rule { explicit_value, soliton, path_average };
  Beta2Rule beta2_rule = Beta2Rule::soliton;
  EdfaParams edfa;                // gain follows the span loss
  EdfaParams booster{0.0, 5.0, false};  // gain set from the launch target
  StepControl step = StepControl::adaptive(1e-3);

  RxOptions rx;
  bool rx_search_from_dt = true;  // search radius Dt/2
  double erased_bit_error = 0.5;
  double osnr_ref_bandwidth = 12.5e9;
  FecThresholds fec;

  BudgetConfig budget;

  std::size_t max_grid_samples = std::size_t{1} << 22;
  unsigned threads = 0;  // 0: hardware concurrency

  // Fills derived fields (timing, beta2, EDFA gain, distances) and checks
  // invariants; throws ConfigError.
  void finalize();
  double launch_peak_watt() const;
  NormalizationScales scales() const;
};

ScenarioConfig default_config();
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);

}  // namespace nlftlink

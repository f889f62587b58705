#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "nlftlink/config.hpp"
#include "nlftlink/records.hpp"

namespace nlftlink {

struct RippleFlag {
  double distance_km = 0.0;
  double drop = 0.0;         // previous mean BER minus this one
  bool significant = false;  // drop larger than twice its binomial standard error
};

struct ScenarioSummary {
  std::vector<double> distances_km;
  std::vector<double> mean_ber;  // over seeds
  double hd_reach_km = 0.0;      // 0 when the first distance already fails
  double sd_reach_km = 0.0;
  std::vector<RippleFlag> ripples;
};

struct RunOptions {
  // Per-symbol records for the first seed at this distance.
  std::optional<double> diagnostics_distance_km;
};

struct RunResult {
  std::vector<ResultRow> rows;  // distance-major, then seed, in config order
  ScenarioSummary summary;
  std::vector<DiagnosticRecord> diagnostics;
  std::size_t n_segments = 1;
};

// Per-channel BER at one receiver position.
struct PointResult {
  std::array<double, kChannels> n_errors{};
  std::array<std::size_t, kChannels> n_bits{};
  std::size_t n_failures = 0;
  std::vector<DiagnosticRecord> diagnostics;

  double ber(int channel_index) const;
  double ber_avg() const;
  PointResult& operator+=(const PointResult& other);
};

// Bit block for one seed.
std::vector<std::uint8_t> seed_bits(const ScenarioConfig& cfg, std::uint64_t seed);

// Transmitter output amplified to the launch peak. The booster adds ASE
// unless `noiseless`; its density is returned in `booster_ase_psd`.
struct Launch {
  TxOutput tx;
  ComplexEnvelope launched;
  double signal_power = 0.0;  // average power of the noiseless launched field, W
  double booster_ase_psd = 0.0;
};
Launch launch_block(const ScenarioConfig& cfg, std::span<const std::uint8_t> bits, std::uint64_t stream,
                    bool noiseless = false);

// Windows of every channel at `distance_km`, following the group-velocity
// drift of each carrier.
std::vector<PulseWindow> expected_windows(const ScenarioConfig& cfg, const TxOutput& tx, double distance_km);

PointResult evaluate_reception(const ScenarioConfig& cfg, const ComplexEnvelope& received, const TxOutput& tx,
                               double distance_km, bool keep_diagnostics = false);

// Number of independent periodic sub-blocks needed under the grid cap.
std::size_t segment_count(const ScenarioConfig& cfg);

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

ScenarioSummary summarize(const ScenarioConfig& cfg, std::span<const ResultRow> rows);

// Transmitted symbols of every simulation block for one seed, with centers on
// the concatenated time axis.
std::array<ChannelTruth, kChannels> transmitted_truth(const ScenarioConfig& cfg, std::uint64_t seed);

enum class EyeFold { dt, tw };

// |field| folded modulo the period, one sample per row. Channel 0 is the full
// WDM field; 1..4 the demultiplexed baseband channel.
std::vector<EyeSample> fold_trace(const ComplexEnvelope& e, double period);
std::vector<EyeSample> eye_export(const ScenarioConfig& cfg, double distance_km, int channel, EyeFold fold,
                                  std::uint64_t seed);

struct BudgetResult {
  LinkBudgetReport report;
  GcCheck gc;
};
BudgetResult budget_report(const ScenarioConfig& cfg);

}  // namespace nlftlink

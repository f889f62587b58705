#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nlftlink/nlft_rx.hpp"
#include "nlftlink/tx_pic.hpp"

namespace nlftlink {

struct ResultRow {
  double distance_km = 0.0;
  double dt_ps = 0.0;
  std::uint64_t seed = 0;
  std::array<double, kChannels> ber{};
  double ber_avg = 0.0;
  double osnr_db = 0.0;  // +inf when there is no noise
  std::size_t n_eigenvalue_failures = 0;
};

struct DiagnosticRecord {
  int channel = 1;
  std::size_t window_index = 0;
  cplx zeta;
  cplx b;
  std::array<std::uint8_t, 2> decided_bits{};
  bool correct = false;
};

struct EyeSample {
  double t_fold = 0.0;  // s
  double magnitude = 0.0;  // sqrt(W)
};

// 9 significant digits; non-finite values print as inf / -inf / nan.
std::string format_number(double v);

// All writers emit a header row and LF line endings.
void write_results_csv(std::ostream& os, std::span<const ResultRow> rows);
void write_truth_csv(std::ostream& os, const std::array<ChannelTruth, kChannels>& truth);
void write_diagnostics_csv(std::ostream& os, std::span<const DiagnosticRecord> records);
void write_eye_csv(std::ostream& os, std::span<const EyeSample> samples);

}  // namespace nlftlink

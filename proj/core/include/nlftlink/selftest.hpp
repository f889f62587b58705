#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlftlink {

struct OracleResult {
  std::string group;
  std::string check;
  bool pass = false;
  std::string detail;
};

struct SelftestOptions {
  // Step multiplier for the layer-doubling refinement check; 1 is nominal.
  double zs_step_scale = 1.0;
  bool run_negative_control = true;
};

struct SelftestReport {
  std::vector<OracleResult> results;
  // The refinement check rerun with a 100x coarser step; it must fail.
  bool negative_control_ran = false;
  bool negative_control_failed = false;

  bool all_pass() const;
  std::vector<std::string> groups() const;
};

SelftestReport run_selftest(const SelftestOptions& opts = {});
void print_selftest(std::ostream& os, const SelftestReport& report);

}  // namespace nlftlink

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nlftlink {

enum class ComponentKind {
  source,
  filter,
  amplifier_to_target,
  fixed_loss,
  modulator,
  splitter_combiner,
};

const char* to_string(ComponentKind kind);
ComponentKind component_kind_from_string(const std::string& s);

// One stage of the transmitter power ledger. Channels are numbered from 1.
struct ComponentSpec {
  std::string name;
  ComponentKind kind = ComponentKind::fixed_loss;
  double insertion_loss_db = 0.0;   // loss stages
  double target_power_dbm = 0.0;    // amplifier_to_target only
  double bandwidth_hz = 0.0;        // informational
  std::vector<int> applies_to;      // empty means every channel
  bool equalize = false;            // extra loss on the stronger channels down to the weakest
};

struct StagePower {
  std::string name;
  std::vector<int> applies_to;      // resolved channel list
  std::vector<double> power_dbm;    // per channel, after this stage
};

struct SafetyConstraint {
  enum class Aggregate { per_channel, total };
  std::string name;
  std::string location;  // stage whose output power is checked
  double limit_dbm = 0.0;
  Aggregate aggregate = Aggregate::total;
  double tolerance_db = 0.0;  // excess tolerated before flagging
};

struct LinkBudgetReport {
  std::vector<StagePower> stages;
  std::vector<double> final_peak_power_dbm;
  std::vector<std::string> violations;

  const StagePower& stage(const std::string& name) const;
};

// Reports below this level are clamped to it.
inline constexpr double kPowerFloorDbm = -90.0;

LinkBudgetReport cascade(const std::vector<ComponentSpec>& chain, double source_power_dbm,
                         int n_lines, const std::vector<SafetyConstraint>& constraints = {});

struct GcCheck {
  bool pass = false;
  double total_dbm = 0.0;
  double margin_db = 0.0;
};

// Total power entering the input grating coupler (the stage just before
// `gc_stage`) against `limit_dbm`. Budget figures carry 0.1 dB resolution, so
// a margin above -tolerance_db still passes.
GcCheck check_gc_limit(const LinkBudgetReport& report, int n_lines,
                       const std::string& gc_stage = "gc_in", double limit_dbm = 16.0,
                       double tolerance_db = 0.05);

double required_launch_gain(double pic_output_peak_dbm, double target_launch_peak_dbm);

// Comb line through the silicon transmitter to the output grating coupler.
std::vector<ComponentSpec> reference_tx_chain();
std::vector<SafetyConstraint> reference_constraints();

void write_budget_table(std::ostream& os, const LinkBudgetReport& report);
void write_budget_csv(std::ostream& os, const LinkBudgetReport& report);

}  // namespace nlftlink

#include "nlftlink/link_budget.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nlftlink/units.hpp"

namespace nlftlink {

const char* to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::source: return "source";
    case ComponentKind::filter: return "filter";
    case ComponentKind::amplifier_to_target: return "amplifier-to-target";
    case ComponentKind::fixed_loss: return "fixed-loss";
    case ComponentKind::modulator: return "modulator";
    case ComponentKind::splitter_combiner: return "splitter-combiner";
  }
  return "?";
}

ComponentKind component_kind_from_string(const std::string& s) {
  for (auto k : {ComponentKind::source, ComponentKind::filter, ComponentKind::amplifier_to_target,
                 ComponentKind::fixed_loss, ComponentKind::modulator,
                 ComponentKind::splitter_combiner})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown component kind '" + s + "'");
}

const StagePower& LinkBudgetReport::stage(const std::string& name) const {
  auto it = std::find_if(stages.begin(), stages.end(),
                         [&](const StagePower& s) { return s.name == name; });
  if (it == stages.end()) throw std::out_of_range("no budget stage named '" + name + "'");
  return *it;
}

namespace {

std::vector<int> resolve_channels(const ComponentSpec& c, int n_lines) {
  if (c.applies_to.empty()) {
    std::vector<int> all(n_lines);
    for (int i = 0; i < n_lines; ++i) all[i] = i + 1;
    return all;
  }
  for (int ch : c.applies_to)
    if (ch < 1 || ch > n_lines)
      throw std::invalid_argument("component '" + c.name + "' applies to channel " +
                                  std::to_string(ch) + " outside 1.." + std::to_string(n_lines));
  return c.applies_to;
}

double total_dbm(const std::vector<double>& dbm) {
  double mw = 0.0;
  for (double p : dbm) mw += std::pow(10.0, p / 10.0);
  return 10.0 * std::log10(mw);
}

}  // namespace

LinkBudgetReport cascade(const std::vector<ComponentSpec>& chain, double source_power_dbm,
                         int n_lines, const std::vector<SafetyConstraint>& constraints) {
  if (chain.empty()) throw std::invalid_argument("cascade: empty component chain");
  if (n_lines < 1) throw std::invalid_argument("cascade: n_lines must be positive");

  LinkBudgetReport report;
  std::vector<double> power(n_lines, source_power_dbm);
  for (const auto& c : chain) {
    if (c.insertion_loss_db < 0.0 || !std::isfinite(c.insertion_loss_db))
      throw std::invalid_argument("component '" + c.name + "' has negative or non-finite loss");
    const auto channels = resolve_channels(c, n_lines);
    switch (c.kind) {
      case ComponentKind::source:
        for (int ch : channels) power[ch - 1] = source_power_dbm;
        break;
      case ComponentKind::amplifier_to_target:
        if (!std::isfinite(c.target_power_dbm))
          throw std::invalid_argument("amplifier '" + c.name + "' needs a finite target");
        for (int ch : channels) power[ch - 1] = c.target_power_dbm;
        break;
      default:
        for (int ch : channels) power[ch - 1] -= c.insertion_loss_db;
        break;
    }
    if (c.equalize) {
      double weakest = power[channels.front() - 1];
      for (int ch : channels) weakest = std::min(weakest, power[ch - 1]);
      for (int ch : channels) power[ch - 1] = weakest;
    }
    StagePower sp{c.name, channels, power};
    for (auto& p : sp.power_dbm) p = std::max(p, kPowerFloorDbm);
    report.stages.push_back(std::move(sp));
  }
  report.final_peak_power_dbm = report.stages.back().power_dbm;

  for (const auto& sc : constraints) {
    auto it = std::find_if(report.stages.begin(), report.stages.end(),
                           [&](const StagePower& s) { return s.name == sc.location; });
    if (it == report.stages.end()) continue;
    const bool over = sc.aggregate == SafetyConstraint::Aggregate::total
                          ? total_dbm(it->power_dbm) > sc.limit_dbm + sc.tolerance_db
                          : *std::max_element(it->power_dbm.begin(), it->power_dbm.end()) >
                                sc.limit_dbm + sc.tolerance_db;
    if (over) report.violations.push_back(sc.name);
  }
  return report;
}

GcCheck check_gc_limit(const LinkBudgetReport& report, int n_lines, const std::string& gc_stage,
                       double limit_dbm, double tolerance_db) {
  auto it = std::find_if(report.stages.begin(), report.stages.end(),
                         [&](const StagePower& s) { return s.name == gc_stage; });
  if (it == report.stages.end() || it == report.stages.begin())
    throw std::invalid_argument("check_gc_limit: no stage precedes '" + gc_stage + "'");
  const auto& before = *std::prev(it);
  double mw = 0.0;
  for (int i = 0; i < n_lines; ++i) {
    const double p = before.power_dbm[static_cast<std::size_t>(i) % before.power_dbm.size()];
    mw += std::pow(10.0, p / 10.0);
  }
  GcCheck out;
  out.total_dbm = 10.0 * std::log10(mw);
  out.margin_db = limit_dbm - out.total_dbm;
  out.pass = out.margin_db >= -tolerance_db;
  return out;
}

double required_launch_gain(double pic_output_peak_dbm, double target_launch_peak_dbm) {
  return target_launch_peak_dbm - pic_output_peak_dbm;
}

std::vector<ComponentSpec> reference_tx_chain() {
  using K = ComponentKind;
  return {
      {"comb_line", K::source, 0.0, 0.0, 0.0, {}, false},
      {"ext_filter", K::filter, 2.0, 0.0, 45e9, {}, false},
      {"edfa", K::amplifier_to_target, 0.0, 10.0, 0.0, {}, false},
      {"gc_in", K::fixed_loss, 3.0, 0.0, 0.0, {}, false},
      {"crow2_oadm", K::filter, 1.6, 0.0, 6.5e9, {}, false},
      {"iq_mzm", K::modulator, 13.5, 0.0, 14e9, {}, false},
      {"delay_line", K::fixed_loss, 3.0, 0.0, 0.0, {1, 2}, false},
      {"crow4_mux", K::filter, 2.0, 0.0, 17.5e9, {}, true},
      {"mmi", K::splitter_combiner, 3.0, 0.0, 0.0, {}, false},
      {"taps", K::fixed_loss, 1.5, 0.0, 0.0, {}, false},
      {"gc_out", K::fixed_loss, 3.0, 0.0, 0.0, {}, false},
  };
}

std::vector<SafetyConstraint> reference_constraints() {
  return {{"gc_input_power", "edfa", 16.0, SafetyConstraint::Aggregate::total, 0.05}};
}

namespace {

std::string channel_group(const std::vector<int>& chs, int n_lines) {
  if (static_cast<int>(chs.size()) == n_lines) {
    bool all = true;
    for (int i = 0; i < n_lines; ++i) all = all && chs[i] == i + 1;
    if (all) return n_lines == 1 ? "1" : "1-" + std::to_string(n_lines);
  }
  std::ostringstream os;
  for (std::size_t i = 0; i < chs.size(); ++i) os << (i ? "+" : "") << chs[i];
  return os.str();
}

}  // namespace

void write_budget_table(std::ostream& os, const LinkBudgetReport& report) {
  if (report.stages.empty()) return;
  const auto n = report.stages.front().power_dbm.size();
  os << std::left << std::setw(14) << "stage" << std::setw(10) << "channels";
  for (std::size_t c = 0; c < n; ++c) os << std::right << std::setw(9) << ("ch" + std::to_string(c + 1));
  os << "  [dBm]\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& s : report.stages) {
    os << std::left << std::setw(14) << s.name << std::setw(10)
       << channel_group(s.applies_to, static_cast<int>(n));
    for (double p : s.power_dbm) os << std::right << std::setw(9) << p;
    os << '\n';
  }
  os << std::defaultfloat;
}

void write_budget_csv(std::ostream& os, const LinkBudgetReport& report) {
  os << "stage,channel_group,power_dbm\n";
  if (report.stages.empty()) return;
  const auto n = static_cast<int>(report.stages.front().power_dbm.size());
  for (const auto& s : report.stages) {
    // Channels a stage applies to share one power after it; report the first.
    os << s.name << ',' << channel_group(s.applies_to, n) << ','
       << std::setprecision(9) << s.power_dbm[s.applies_to.front() - 1] << '\n';
  }
}

}  // namespace nlftlink

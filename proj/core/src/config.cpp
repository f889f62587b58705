#include "nlftlink/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nlftlink/units.hpp"

namespace nlftlink {

using nlohmann::json;

namespace {

// Typed access to one JSON object that rejects keys nobody asked about.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    for (const auto& [key, _] : j_.items())
      if (!allowed.count(key)) throw ConfigError(path_ + ": unknown key '" + key + "'");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  bool is_null(const std::string& key) const { return has(key) && j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }

  template <class T>
  void get(const std::string& key, T& out) const {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  // Scaled numeric value: config unit times `scale` gives SI.
  void get_scaled(const std::string& key, double& out, double scale) const {
    if (!has(key)) return;
    double v = 0.0;
    get(key, v);
    if (!std::isfinite(v)) throw ConfigError(path_ + "." + key + ": not finite");
    out = v * scale;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
};

const json& child(const json& root, const std::string& key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

TxMode parse_mode(const std::string& s) {
  if (s == "idealized") return TxMode::idealized;
  if (s == "hardware-faithful") return TxMode::hardware_faithful;
  throw ConfigError("scenario.mode: expected 'idealized' or 'hardware-faithful'");
}

ComponentSpec parse_component(const json& j, const std::string& path) {
  Section s(j, path, {"name", "kind", "il_db", "target_dbm", "bandwidth_ghz", "applies_to", "equalize"});
  ComponentSpec c;
  s.get("name", c.name);
  if (c.name.empty()) throw ConfigError(path + ": missing name");
  std::string kind = "fixed-loss";
  s.get("kind", kind);
  try {
    c.kind = component_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ".kind: " + e.what());
  }
  s.get("il_db", c.insertion_loss_db);
  s.get("target_dbm", c.target_power_dbm);
  s.get_scaled("bandwidth_ghz", c.bandwidth_hz, 1e9);
  s.get("applies_to", c.applies_to);
  s.get("equalize", c.equalize);
  return c;
}

SafetyConstraint parse_constraint(const json& j, const std::string& path) {
  Section s(j, path, {"name", "location", "limit_dbm", "aggregate", "tolerance_db"});
  SafetyConstraint c;
  s.get("name", c.name);
  s.get("location", c.location);
  s.get("limit_dbm", c.limit_dbm);
  s.get("tolerance_db", c.tolerance_db);
  std::string agg = "total";
  s.get("aggregate", agg);
  if (agg == "total") c.aggregate = SafetyConstraint::Aggregate::total;
  else if (agg == "per-channel") c.aggregate = SafetyConstraint::Aggregate::per_channel;
  else throw ConfigError(path + ".aggregate: expected 'total' or 'per-channel'");
  return c;
}

}  // namespace

double ScenarioConfig::launch_peak_watt() const { return dbm_to_watt(launch_peak_dbm); }

NormalizationScales ScenarioConfig::scales() const {
  return {soliton.t0, launch_peak_watt(), dispersion_length_km(fiber, soliton.t0)};
}

void ScenarioConfig::finalize() {
  if (n_bits == 0 || n_bits % 8 != 0) throw ConfigError("scenario.n_bits must be a positive multiple of 8");
  if (seeds.empty()) throw ConfigError("scenario.seeds must not be empty");
  if (!(sample_rate > 0.0)) throw ConfigError("scenario.sample_rate_gsps must be positive");
  if (!(soliton.t0 > 0.0)) throw ConfigError("soliton.t0_ps must be positive");

  if (solve_timing) {
    try {
      const auto ts = timing_solve(plan.dt, plan.tw);
      plan.tau_wg = ts.tau_wg;
      plan.tau_awg = ts.tau_awg;
    } catch (const InfeasibleTiming& e) {
      std::ostringstream os;
      os << e.what() << " (nearest feasible Dt: " << e.nearest_dt() * 1e12 << " ps)";
      throw ConfigError(os.str());
    }
  }
  try {
    plan.validate();
    if (mzm_penalty_db) mzm = calibrate_penalty(mzm, soliton, *mzm_penalty_db);
    fiber.validate();
    const double p0 = launch_peak_watt();
    const double t0 = soliton.t0;
    if (beta2_rule == Beta2Rule::soliton)
      fiber.beta2_ps2_per_km = -fiber.gamma_per_w_km * p0 * t0 * t0 * 1e24;
    else if (beta2_rule == Beta2Rule::path_average)
      fiber.beta2_ps2_per_km = guiding_center_beta2(fiber, p0, t0);
    if (!(fiber.beta2_ps2_per_km < 0.0)) throw ConfigError("fiber.beta2_ps2_per_km must be negative (anomalous)");
    edfa.gain_db = fiber.span_loss_db();
    edfa.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (distances_km.empty()) {
    for (double d = fiber.span_km; d <= 3750.0 + 1e-9; d += fiber.span_km) distances_km.push_back(d);
  }
  for (double d : distances_km) {
    const double spans = d / fiber.span_km;
    if (!(d > 0.0) || std::abs(spans - std::round(spans)) > 1e-9)
      throw ConfigError("scenario.distances_km must be positive multiples of the span length");
  }
  for (std::size_t i = 1; i < distances_km.size(); ++i)
    if (!(distances_km[i] > distances_km[i - 1]))
      throw ConfigError("scenario.distances_km must be strictly increasing");

  if (rx_search_from_dt) rx.search_radius = 0.5 * plan.dt;
  if (rx.bps_window < 1 || rx.bps_window % 2 == 0) throw ConfigError("rx.bps_window must be odd");
  if (rx.bps_test_phases < 4) throw ConfigError("rx.bps_test_phases must be >= 4");
  if (!(fec.hd > 0.0) || !(fec.sd >= fec.hd)) throw ConfigError("fec: need 0 < hd <= sd");
  if (erased_bit_error < 0.0 || erased_bit_error > 1.0) throw ConfigError("rx.erased_bit_error must be in [0, 1]");
  if (max_grid_samples < 1024) throw ConfigError("limits.max_grid_samples too small");
}

ScenarioConfig default_config() {
  ScenarioConfig cfg;
  cfg.finalize();
  return cfg;
}

ScenarioConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  Section top(root, "config", {"scenario", "plan", "soliton", "mzm", "tx", "fiber", "edfa", "booster",
                               "step", "rx", "osnr", "fec", "budget", "limits"});
  ScenarioConfig cfg;

  {
    Section s(child(root, "scenario"), "scenario",
              {"n_bits", "mode", "launch_peak_dbm", "distances_km", "max_distance_km", "seeds",
               "master_seed", "sample_rate_gsps"});
    s.get("n_bits", cfg.n_bits);
    if (s.has("mode")) {
      std::string m;
      s.get("mode", m);
      cfg.mode = parse_mode(m);
    }
    s.get("launch_peak_dbm", cfg.launch_peak_dbm);
    s.get("distances_km", cfg.distances_km);
    if (s.has("max_distance_km")) {
      if (s.has("distances_km")) throw ConfigError("scenario: give distances_km or max_distance_km, not both");
      double max_km = 0.0;
      s.get("max_distance_km", max_km);
      double span = 50.0;
      if (root.contains("fiber") && root.at("fiber").contains("span_km")) span = root.at("fiber").at("span_km").get<double>();
      for (double d = span; d <= max_km + 1e-9; d += span) cfg.distances_km.push_back(d);
    }
    s.get("seeds", cfg.seeds);
    s.get("master_seed", cfg.master_seed);
    s.get_scaled("sample_rate_gsps", cfg.sample_rate, 1e9);
  }
  {
    Section s(child(root, "plan"), "plan",
              {"dt_ps", "tw_ps", "delta_f_ghz", "comb_fsr_ghz", "comb_fsr_min_ghz", "comb_fsr_max_ghz",
               "tau_wg_ps", "tau_awg_ps", "linewidth_khz", "phase_noise"});
    auto& p = cfg.plan;
    s.get_scaled("dt_ps", p.dt, 1e-12);
    s.get_scaled("tw_ps", p.tw, 1e-12);
    if (s.has("delta_f_ghz")) {
      std::vector<double> v;
      s.get("delta_f_ghz", v);
      if (v.size() != kChannels) throw ConfigError("plan.delta_f_ghz needs four values");
      for (int k = 0; k < kChannels; ++k) p.delta_f[k] = v[k] * 1e9;
    }
    s.get_scaled("comb_fsr_ghz", p.comb_fsr, 1e9);
    s.get_scaled("comb_fsr_min_ghz", p.comb_fsr_min, 1e9);
    s.get_scaled("comb_fsr_max_ghz", p.comb_fsr_max, 1e9);
    if (s.has("tau_wg_ps") != s.has("tau_awg_ps"))
      throw ConfigError("plan: tau_wg_ps and tau_awg_ps go together");
    if (s.has("tau_wg_ps")) {
      cfg.solve_timing = false;
      s.get_scaled("tau_wg_ps", p.tau_wg, 1e-12);
      s.get_scaled("tau_awg_ps", p.tau_awg, 1e-12);
    }
    s.get_scaled("linewidth_khz", p.linewidth, 1e3);
    s.get("phase_noise", p.phase_noise);
  }
  {
    Section s(child(root, "soliton"), "soliton", {"t0_ps", "peak_drive_v"});
    s.get_scaled("t0_ps", cfg.soliton.t0, 1e-12);
    s.get("peak_drive_v", cfg.soliton.peak_drive);
  }
  {
    Section s(child(root, "mzm"), "mzm", {"vpi_l_v_cm", "length_mm", "vpi_v", "eo_bandwidth_ghz", "il_db", "drive_gain", "penalty_db"});
    if (s.has("vpi_v") && (s.has("vpi_l_v_cm") || s.has("length_mm")))
      throw ConfigError("mzm: give vpi_v or vpi_l_v_cm with length_mm, not both");
    if (s.has("vpi_l_v_cm") || s.has("length_mm")) {
      double vpil = 2.45;
      double len = 4.4;
      s.get("vpi_l_v_cm", vpil);
      s.get("length_mm", len);
      if (!(vpil > 0.0) || !(len > 0.0)) throw ConfigError("mzm: VpiL and length must be positive");
      cfg.mzm.vpi = MzmParams::from_vpi_l(vpil, len).vpi;
    }
    s.get("vpi_v", cfg.mzm.vpi);
    s.get_scaled("eo_bandwidth_ghz", cfg.mzm.eo_bandwidth, 1e9);
    s.get("il_db", cfg.mzm.il_db);
    s.get("drive_gain", cfg.mzm.drive_gain);
    if (s.has("penalty_db")) {
      if (s.is_null("penalty_db")) {
        cfg.mzm_penalty_db.reset();
      } else {
        double v = 0.0;
        s.get("penalty_db", v);
        cfg.mzm_penalty_db = v;
      }
    } else if (s.has("drive_gain")) {
      cfg.mzm_penalty_db.reset();
    }
  }
  {
    Section s(child(root, "tx"), "tx",
              {"line_power_dbm", "gc_in_il_db", "route_order", "route_bw_ghz", "route_il_db", "delay_il_db",
               "mux_order", "mux_bw_ghz", "mux_il_db", "mmi_il_db", "tap_il_db", "gc_out_il_db"});
    auto& h = cfg.tx;
    s.get("line_power_dbm", h.line_power_dbm);
    s.get("gc_in_il_db", h.gc_in_il_db);
    s.get("route_order", h.route.order);
    s.get_scaled("route_bw_ghz", h.route.bandwidth_3db, 1e9);
    s.get("route_il_db", h.route.il_db);
    s.get("delay_il_db", h.delay_il_db);
    s.get("mux_order", h.mux.order);
    s.get_scaled("mux_bw_ghz", h.mux.bandwidth_3db, 1e9);
    s.get("mux_il_db", h.mux.il_db);
    s.get("mmi_il_db", h.mmi_il_db);
    s.get("tap_il_db", h.tap_il_db);
    s.get("gc_out_il_db", h.gc_out_il_db);
  }
  {
    Section s(child(root, "fiber"), "fiber",
              {"alpha_db_per_km", "beta2_ps2_per_km", "beta2_rule", "gamma_per_w_km", "span_km"});
    s.get("alpha_db_per_km", cfg.fiber.alpha_db_per_km);
    if (s.has("beta2_rule")) {
      std::string rule;
      s.get("beta2_rule", rule);
      if (rule == "soliton") cfg.beta2_rule = ScenarioConfig::Beta2Rule::soliton;
      else if (rule == "path-average") cfg.beta2_rule = ScenarioConfig::Beta2Rule::path_average;
      else throw ConfigError("fiber.beta2_rule: expected 'soliton' or 'path-average'");
    }
    if (s.has("beta2_ps2_per_km") && !s.is_null("beta2_ps2_per_km")) {
      if (s.has("beta2_rule")) throw ConfigError("fiber: give beta2_ps2_per_km or beta2_rule, not both");
      cfg.beta2_rule = ScenarioConfig::Beta2Rule::explicit_value;
      s.get("beta2_ps2_per_km", cfg.fiber.beta2_ps2_per_km);
    }
    s.get("gamma_per_w_km", cfg.fiber.gamma_per_w_km);
    s.get("span_km", cfg.fiber.span_km);
  }
  {
    Section s(child(root, "edfa"), "edfa", {"nf_db", "noiseless"});
    s.get("nf_db", cfg.edfa.nf_db);
    s.get("noiseless", cfg.edfa.noiseless);
  }
  {
    Section s(child(root, "booster"), "booster", {"nf_db", "noiseless"});
    s.get("nf_db", cfg.booster.nf_db);
    s.get("noiseless", cfg.booster.noiseless);
  }
  {
    Section s(child(root, "step"), "step", {"mode", "max_nl_phase_rad", "dz_km"});
    std::string mode = "adaptive";
    s.get("mode", mode);
    if (mode == "adaptive") cfg.step.mode = StepControl::Mode::adaptive;
    else if (mode == "fixed") cfg.step.mode = StepControl::Mode::fixed;
    else throw ConfigError("step.mode: expected 'adaptive' or 'fixed'");
    s.get("max_nl_phase_rad", cfg.step.max_nl_phase);
    s.get("dz_km", cfg.step.dz_km);
    if (!(cfg.step.max_nl_phase > 0.0) || !(cfg.step.dz_km > 0.0)) throw ConfigError("step: values must be positive");
  }
  {
    Section s(child(root, "rx"), "rx",
              {"bw_ghz", "demux_order", "adc_rate_gsps", "search_radius_ps", "bps_test_phases", "bps_window",
               "pilot_symbols", "erased_bit_error"});
    auto& r = cfg.rx;
    s.get_scaled("bw_ghz", r.rx_bw, 1e9);
    s.get("demux_order", r.demux_order);
    s.get_scaled("adc_rate_gsps", r.adc_rate, 1e9);
    if (s.has("search_radius_ps") && !s.is_null("search_radius_ps")) {
      cfg.rx_search_from_dt = false;
      s.get_scaled("search_radius_ps", r.search_radius, 1e-12);
    }
    s.get("bps_test_phases", r.bps_test_phases);
    s.get("bps_window", r.bps_window);
    s.get("pilot_symbols", r.pilot_symbols);
    s.get("erased_bit_error", cfg.erased_bit_error);
  }
  {
    Section s(child(root, "osnr"), "osnr", {"ref_bandwidth_ghz"});
    s.get_scaled("ref_bandwidth_ghz", cfg.osnr_ref_bandwidth, 1e9);
  }
  {
    Section s(child(root, "fec"), "fec", {"hd", "sd"});
    s.get("hd", cfg.fec.hd);
    s.get("sd", cfg.fec.sd);
  }
  {
    Section s(child(root, "budget"), "budget",
              {"source_dbm", "n_lines", "gc_stage", "gc_limit_dbm", "gc_tolerance_db", "chain", "constraints"});
    auto& b = cfg.budget;
    s.get("source_dbm", b.source_power_dbm);
    s.get("n_lines", b.n_lines);
    s.get("gc_stage", b.gc_stage);
    s.get("gc_limit_dbm", b.gc_limit_dbm);
    s.get("gc_tolerance_db", b.gc_tolerance_db);
    if (s.has("chain")) {
      const auto& arr = s.raw("chain");
      if (!arr.is_array() || arr.empty()) throw ConfigError("budget.chain must be a non-empty array");
      b.chain.clear();
      for (std::size_t i = 0; i < arr.size(); ++i)
        b.chain.push_back(parse_component(arr[i], "budget.chain[" + std::to_string(i) + "]"));
    }
    if (s.has("constraints")) {
      const auto& arr = s.raw("constraints");
      if (!arr.is_array()) throw ConfigError("budget.constraints must be an array");
      b.constraints.clear();
      for (std::size_t i = 0; i < arr.size(); ++i)
        b.constraints.push_back(parse_constraint(arr[i], "budget.constraints[" + std::to_string(i) + "]"));
    }
  }
  {
    Section s(child(root, "limits"), "limits", {"max_grid_samples", "threads"});
    s.get("max_grid_samples", cfg.max_grid_samples);
    s.get("threads", cfg.threads);
  }

  cfg.finalize();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace nlftlink

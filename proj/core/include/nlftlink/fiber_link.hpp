#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>

#include "nlftlink/signal_core.hpp"

namespace nlftlink {

// NZDSF span. beta2 < 0 is anomalous dispersion.
struct FiberParams {
  double alpha_db_per_km = 0.2;
  double beta2_ps2_per_km = -2.156;
  double gamma_per_w_km = 1.6;
  double span_km = 50.0;

  void validate() const;
  double beta2_s2_per_km() const { return beta2_ps2_per_km * 1e-24; }
  double span_loss_db() const { return alpha_db_per_km * span_km; }
};

struct EdfaParams {
  double gain_db = 10.0;
  double nf_db = 5.0;
  bool noiseless = false;  // drops the ASE entirely (lossless-limit checks)

  void validate() const;
};

struct StepControl {
  enum class Mode { fixed, adaptive };
  Mode mode = Mode::adaptive;
  double dz_km = 0.5;             // fixed mode
  double max_nl_phase = 1e-3;     // adaptive mode, rad per step

  static StepControl fixed(double dz_km) { return {Mode::fixed, dz_km, 1e-3}; }
  static StepControl adaptive(double max_phase) { return {Mode::adaptive, 0.5, max_phase}; }
};

// Fundamental soliton peak power |beta2| / (gamma T0^2).
double soliton_power(const FiberParams& fp, double t0);

// Ratio of path-averaged to launch power over one span, (1 - e^{-aL}) / (aL).
double path_average_factor(const FiberParams& fp);

// Anomalous beta2 (ps^2/km) that makes `launch_peak` the path-averaged
// fundamental-soliton power for width t0 on this span.
double guiding_center_beta2(const FiberParams& fp, double launch_peak, double t0);

// Dispersion length T0^2/|beta2| in km.
double dispersion_length_km(const FiberParams& fp, double t0);

// Largest nonlinear phase allowed in a single step.
inline constexpr double kMaxNonlinearPhasePerStep = 0.1;

class StepControlError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Symmetric split-step solution of
//   dA/dz = -(alpha/2) A - i (beta2/2) d2A/dt2 + i gamma |A|^2 A
// over `length_km` (one span by default). The grid is periodic.
ComplexEnvelope ssfm_span(const ComplexEnvelope& e, const FiberParams& fp, const StepControl& sc);
ComplexEnvelope ssfm_propagate(const ComplexEnvelope& e, const FiberParams& fp,
                               const StepControl& sc, double length_km);

struct AmplifiedField {
  ComplexEnvelope envelope;
  double ase_psd = 0.0;  // W/Hz, one polarization
};

// One-sided ASE density per polarization, (F G - 1) h nu / 2.
double ase_psd(const EdfaParams& ep, const OpticalConstants& oc);

AmplifiedField edfa_amplify(const ComplexEnvelope& e, const EdfaParams& ep,
                            const OpticalConstants& oc, std::uint64_t seed);

struct LinkOutput {
  ComplexEnvelope envelope;
  double accumulated_ase_psd = 0.0;
};

// Called after every amplified span with its 1-based index.
using SpanObserver = std::function<void(int span, const ComplexEnvelope&, double ase_psd)>;

// Span i (0-based) draws its ASE from derive_seed(seed, {i}).
LinkOutput propagate_link(const ComplexEnvelope& e, int n_spans, const FiberParams& fp,
                          const EdfaParams& ep, const StepControl& sc, std::uint64_t seed,
                          const OpticalConstants& oc = {}, const SpanObserver& observer = {});

// 10 log10(P_avg / (2 rho B_ref)); +infinity when rho == 0.
double osnr_estimate(const ComplexEnvelope& signal, double ase_psd, double ref_bandwidth = 12.5e9);

// Per-span field snapshot: u64 n_samples, f64 sample_rate, u64 span index,
// then interleaved re/im f64 samples; all little-endian.
void write_field_record(std::ostream& os, const ComplexEnvelope& e, std::uint64_t span_index);
struct FieldRecord {
  std::uint64_t span_index = 0;
  ComplexEnvelope envelope;
};
FieldRecord read_field_record(std::istream& is);

}  // namespace nlftlink

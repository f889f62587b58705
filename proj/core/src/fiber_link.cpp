#include "nlftlink/fiber_link.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "nlftlink/rng.hpp"
#include "nlftlink/units.hpp"

namespace nlftlink {

void FiberParams::validate() const {
  if (alpha_db_per_km < 0.0) throw std::invalid_argument("fiber: alpha must be >= 0");
  if (!(span_km > 0.0)) throw std::invalid_argument("fiber: span length must be positive");
  if (gamma_per_w_km < 0.0) throw std::invalid_argument("fiber: gamma must be >= 0");
  if (!std::isfinite(beta2_ps2_per_km)) throw std::invalid_argument("fiber: beta2 must be finite");
}

void EdfaParams::validate() const {
  if (gain_db < 0.0 || !std::isfinite(gain_db)) throw std::invalid_argument("edfa: gain must be finite and >= 0");
  if (!noiseless && nf_db < 3.0) throw std::invalid_argument("edfa: noise figure below the 3 dB quantum limit");
}

double soliton_power(const FiberParams& fp, double t0) {
  if (!(fp.beta2_ps2_per_km < 0.0))
    throw std::invalid_argument("soliton_power: needs anomalous dispersion (beta2 < 0)");
  if (!(fp.gamma_per_w_km > 0.0)) throw std::invalid_argument("soliton_power: gamma must be positive");
  return std::abs(fp.beta2_s2_per_km()) / (fp.gamma_per_w_km * t0 * t0);
}

double path_average_factor(const FiberParams& fp) {
  const double al = alpha_db_to_neper(fp.alpha_db_per_km) * fp.span_km;
  return al > 0.0 ? -std::expm1(-al) / al : 1.0;
}

double guiding_center_beta2(const FiberParams& fp, double launch_peak, double t0) {
  const double b2_s2 = fp.gamma_per_w_km * path_average_factor(fp) * launch_peak * t0 * t0;
  return -b2_s2 * 1e24;
}

double dispersion_length_km(const FiberParams& fp, double t0) {
  return t0 * t0 / std::abs(fp.beta2_s2_per_km());
}

namespace {

class SplitStepper {
 public:
  SplitStepper(const SignalGrid& g, const FiberParams& fp)
      : omega2_(g.n_samples()),
        half_loss_(0.5 * alpha_db_to_neper(fp.alpha_db_per_km)),
        half_beta2_(0.5 * fp.beta2_s2_per_km()),
        gamma_(fp.gamma_per_w_km) {
    for (std::size_t k = 0; k < omega2_.size(); ++k) {
      const double w = 2.0 * kPi * g.frequency(k);
      omega2_[k] = w * w;
    }
  }

  void linear(std::vector<cplx>& u, double h) const {
    if (h == 0.0) return;
    fft_inplace(u);
    const double amp = std::exp(-half_loss_ * h);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] *= std::polar(amp, half_beta2_ * omega2_[k] * h);
    ifft_inplace(u);
  }

  void nonlinear(std::vector<cplx>& u, double h) const {
    if (gamma_ == 0.0) return;
    for (auto& s : u) s *= std::polar(1.0, gamma_ * std::norm(s) * h);
  }

  double max_power(const std::vector<cplx>& u) const {
    double p = 0.0;
    for (const auto& s : u) p = std::max(p, std::norm(s));
    return p;
  }

  double gamma() const { return gamma_; }

 private:
  std::vector<double> omega2_;
  double half_loss_;
  double half_beta2_;
  double gamma_;
};

}  // namespace

ComplexEnvelope ssfm_propagate(const ComplexEnvelope& e, const FiberParams& fp,
                               const StepControl& sc, double length_km) {
  fp.validate();
  if (!(length_km >= 0.0)) throw std::invalid_argument("ssfm: negative length");
  if (sc.mode == StepControl::Mode::fixed ? !(sc.dz_km > 0.0) : !(sc.max_nl_phase > 0.0))
    throw std::invalid_argument("ssfm: step parameters must be positive");
  if (length_km == 0.0) return e;

  const SplitStepper stepper(e.grid(), fp);
  std::vector<cplx> u(e.samples().begin(), e.samples().end());

  auto choose = [&](double remaining) {
    double dz = sc.dz_km;
    if (sc.mode == StepControl::Mode::adaptive) {
      const double rate = stepper.gamma() * stepper.max_power(u);
      dz = rate > 0.0 ? sc.max_nl_phase / rate : remaining;
    }
    dz = std::min(dz, remaining);
    // Absorb a sliver of a final step into this one.
    if (remaining - dz < 1e-9 * length_km) dz = remaining;
    if (stepper.gamma() * stepper.max_power(u) * dz > kMaxNonlinearPhasePerStep)
      throw StepControlError("ssfm: nonlinear phase per step exceeds 0.1 rad; reduce the step");
    return dz;
  };

  // Half linear steps of neighbouring slices are merged into one operator.
  double z = 0.0;
  double dz = choose(length_km);
  stepper.linear(u, 0.5 * dz);
  for (;;) {
    stepper.nonlinear(u, dz);
    z += dz;
    const double remaining = length_km - z;
    if (remaining <= 1e-12 * length_km) {
      stepper.linear(u, 0.5 * dz);
      break;
    }
    const double next = choose(remaining);
    stepper.linear(u, 0.5 * (dz + next));
    dz = next;
  }
  return ComplexEnvelope(e.grid(), std::move(u), e.center_offset());
}

ComplexEnvelope ssfm_span(const ComplexEnvelope& e, const FiberParams& fp, const StepControl& sc) {
  return ssfm_propagate(e, fp, sc, fp.span_km);
}

double ase_psd(const EdfaParams& ep, const OpticalConstants& oc) {
  if (ep.noiseless) return 0.0;
  const double g = db_to_linear(ep.gain_db);
  const double f = db_to_linear(ep.nf_db);
  return std::max(0.0, f * g - 1.0) * oc.planck_h * oc.carrier_frequency / 2.0;
}

AmplifiedField edfa_amplify(const ComplexEnvelope& e, const EdfaParams& ep,
                            const OpticalConstants& oc, std::uint64_t seed) {
  ep.validate();
  const double rho = ase_psd(ep, oc);
  const double field_gain = db_to_field(ep.gain_db);
  std::vector<cplx> out(e.samples().begin(), e.samples().end());
  if (rho > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    const double sigma = std::sqrt(0.5 * rho * e.grid().sample_rate());
    for (auto& s : out) {
      const double re = n01(rng);
      const double im = n01(rng);
      s = field_gain * s + sigma * cplx(re, im);
    }
  } else {
    for (auto& s : out) s *= field_gain;
  }
  return {ComplexEnvelope(e.grid(), std::move(out), e.center_offset()), rho};
}

LinkOutput propagate_link(const ComplexEnvelope& e, int n_spans, const FiberParams& fp,
                          const EdfaParams& ep, const StepControl& sc, std::uint64_t seed,
                          const OpticalConstants& oc, const SpanObserver& observer) {
  if (n_spans < 0) throw std::invalid_argument("propagate_link: negative span count");
  if (std::abs(ep.gain_db - fp.span_loss_db()) > 1e-9)
    throw std::invalid_argument("propagate_link: amplifier gain must equal the span loss");
  LinkOutput out{e, 0.0};
  for (int i = 0; i < n_spans; ++i) {
    auto amplified = edfa_amplify(ssfm_span(out.envelope, fp, sc), ep, oc,
                                  derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    out.envelope = std::move(amplified.envelope);
    out.accumulated_ase_psd += amplified.ase_psd;
    if (observer) observer(i + 1, out.envelope, out.accumulated_ase_psd);
  }
  return out;
}

double osnr_estimate(const ComplexEnvelope& signal, double ase_psd, double ref_bandwidth) {
  if (ase_psd < 0.0) throw std::invalid_argument("osnr_estimate: negative noise density");
  if (ase_psd == 0.0) return std::numeric_limits<double>::infinity();
  return linear_to_db(average_power(signal) / (2.0 * ase_psd * ref_bandwidth));
}

namespace {

template <class T>
void put_le(std::ostream& os, T value) {
  auto raw = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  os.write(reinterpret_cast<const char*>(raw.data()), raw.size());
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> raw{};
  if (!is.read(reinterpret_cast<char*>(raw.data()), raw.size()))
    throw std::runtime_error("field record: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  return std::bit_cast<T>(raw);
}

}  // namespace

void write_field_record(std::ostream& os, const ComplexEnvelope& e, std::uint64_t span_index) {
  put_le<std::uint64_t>(os, e.size());
  put_le<double>(os, e.grid().sample_rate());
  put_le<std::uint64_t>(os, span_index);
  for (const auto& s : e.samples()) {
    put_le<double>(os, s.real());
    put_le<double>(os, s.imag());
  }
}

FieldRecord read_field_record(std::istream& is) {
  const auto n = get_le<std::uint64_t>(is);
  const auto fs = get_le<double>(is);
  const auto span = get_le<std::uint64_t>(is);
  std::vector<cplx> samples(n);
  for (auto& s : samples) {
    const double re = get_le<double>(is);
    const double im = get_le<double>(is);
    s = {re, im};
  }
  return {span, ComplexEnvelope(make_grid(n, fs), std::move(samples))};
}

}  // namespace nlftlink

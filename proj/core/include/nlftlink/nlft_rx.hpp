#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "nlftlink/signal_core.hpp"
#include "nlftlink/tx_pic.hpp"

namespace nlftlink {

// Soliton units: q = A / sqrt(P_sol), tau = t / T0, xi = z / L_D.
struct NormalizationScales {
  double t0 = 38e-12;
  double p_sol = 1e-3;
  double l_d_km = 1.0;

  void validate() const;
};

// Samples of q on tau_j = tau_start + j * dtau. Sample j stands for the
// potential on [tau_j - dtau/2, tau_j + dtau/2).
struct NormalizedField {
  std::vector<cplx> q;
  double tau_start = 0.0;
  double dtau = 1.0;

  double tau(std::size_t j) const { return tau_start + static_cast<double>(j) * dtau; }
  double left_edge() const { return tau_start - 0.5 * dtau; }
  double right_edge() const { return tau(q.size() - 1) + 0.5 * dtau; }
};

// Scattering data at one spectral parameter. b is phi1/psi1; b_check is
// phi2/psi2, which agrees with b only at a discrete eigenvalue.
struct NlftPoint {
  cplx zeta;
  cplx a;
  cplx b;
  cplx b_check;
};

struct PulseWindow {
  int channel = 1;
  double center = 0.0;      // s, expected pulse position on the grid
  double half_width = 0.0;  // s
};

class ScatteringError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EigenvalueError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shift the channel to baseband and low-pass it with an order-`order`
// zero-phase Butterworth of full 3 dB width rx_bw.
ComplexEnvelope demux(const ComplexEnvelope& e, double channel_offset, double rx_bw, int order = 4);

NormalizedField normalize(const ComplexEnvelope& e, const NormalizationScales& ns);
NormalizedField normalize(std::span<const cplx> samples, double t_start, double dt,
                          const NormalizationScales& ns);

// ZS system v1' = -i zeta v1 + q v2, v2' = -conj(q) v1 + i zeta v2.
using Transfer = std::array<cplx, 4>;  // row-major 2x2

// Exact transfer matrix of the piecewise-constant potential, left to right.
Transfer zs_transfer(std::span<const cplx> q, double dtau, cplx zeta);

struct ScatterOptions {
  double edge_tolerance = 1e-6;          // |q| at both ends; infinity disables
  std::optional<double> matching_tau;    // default: |q| centroid
  bool check_b = false;                  // require b == b_check
  double b_tolerance = 1e-6;             // relative
};

NlftPoint zs_scatter(const NormalizedField& q, cplx zeta, const ScatterOptions& opts = {});

struct EigenOptions {
  int max_iterations = 50;
  double a_tolerance = 1e-9;
  double step_tolerance = 1e-10;
  double fd_step = 1e-6;
  ScatterOptions scatter{};
};

cplx find_eigenvalue(const NormalizedField& q, cplx zeta0 = {0.0, 0.5},
                     const EigenOptions& opts = {});

// Undo the propagation phase of b: with q_xi = i(q_tautau / 2 + |q|^2 q) and
// b = phi1/psi1, b evolves as b(xi) = b(0) exp(2 i zeta^2 xi). The inverse
// multiplier exp(-2 i zeta^2 xi) is applied here; a is invariant.
NlftPoint channel_compensate(const NlftPoint& p, double xi);
cplx compensation_multiplier(cplx zeta, double xi);

struct BpsResult {
  std::vector<cplx> symbols;
  std::vector<double> phase;  // rad, unwrapped
};

// Test phases b * (pi/2) / n_test. `pilots` (known leading symbols) fix the
// remaining pi/2 ambiguity.
BpsResult blind_phase_search(std::span<const cplx> symbols, int n_test, int window,
                             std::span<const cplx> pilots = {});

struct BerCount {
  double ber = 0.0;
  double n_errors = 0.0;
  std::size_t n_bits = 0;
};

// erased[k] != 0 marks symbol k as lost; each of its bits counts as
// `erased_bit_error` of an error.
BerCount decide_and_count(std::span<const cplx> rx_symbols, std::span<const std::uint8_t> tx_bits,
                          std::span<const std::uint8_t> erased = {}, double erased_bit_error = 0.5);

struct RxOptions {
  double rx_bw = 9e9;
  int demux_order = 4;
  double adc_rate = 128e9;       // samples per second after the demux filter
  double search_radius = 125e-12;  // centroid search around the expected center
  int bps_test_phases = 32;
  int bps_window = 65;
  std::size_t pilot_symbols = 16;
};

struct ChannelReception {
  int channel = 1;
  std::vector<cplx> raw_symbols;  // before phase search
  std::vector<cplx> symbols;      // after phase search
  std::vector<std::uint8_t> erased;
  std::vector<NlftPoint> points;  // compensated scattering data per window
  std::vector<double> centers;    // s, centroid used for each window
  std::size_t n_failures = 0;
};

// b of the unmodulated sech potential centered at tau = 0, at zeta = i/2.
inline constexpr cplx kReferenceB{-1.0, 0.0};

ChannelReception receive_channel(const ComplexEnvelope& e, int channel, double channel_offset,
                                 std::span<const PulseWindow> windows, const NormalizationScales& ns,
                                 double distance_km, std::span<const cplx> pilots,
                                 const RxOptions& opts);

std::array<ChannelReception, kChannels> receive_window(
    const ComplexEnvelope& e, const ChannelPlan& plan, const NormalizationScales& ns,
    std::span<const PulseWindow> windows, double distance_km,
    const std::array<std::vector<cplx>, kChannels>& pilots, const RxOptions& opts);

}  // namespace nlftlink

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "nlftlink/signal_core.hpp"

namespace nlftlink {

inline constexpr int kChannels = 4;

struct SolitonParams {
  double t0 = 38e-12;        // characteristic sech width, s
  double peak_drive = 0.5;   // V; 1 Vpp swing of the complex drive envelope
};

// Programmable state of the transmitter: carrier grid and pulse timing.
struct ChannelPlan {
  std::array<double, kChannels> delta_f{-15e9, -5e9, 5e9, 15e9};
  double comb_fsr = 10e9;
  double comb_fsr_min = 6e9;
  double comb_fsr_max = 14e9;
  double dt = 250e-12;       // pulse-to-pulse spacing
  double tw = 1000e-12;      // transmission window
  double tau_wg = 500e-12;   // on-chip delay on channels 1 and 2
  double tau_awg = 250e-12;  // electrical delay of IQ-MZM B against A
  double linewidth = 80e3;   // Hz
  bool phase_noise = false;

  void validate() const;
  // Nominal center of channel k (1-based) inside the window.
  double center(int channel) const { return dt * (0.5 + (channel - 1)); }
};

inline constexpr std::array<double, 2> kTauWgOptions{300e-12, 500e-12};

struct MzmParams {
  double vpi = 2.45e-2 / 4.4e-3;  // V, from VpiL = 2.45 V*cm over 4.4 mm
  double eo_bandwidth = 14e9;     // Hz, single-pole 3 dB point
  double il_db = 4.5;
  double drive_gain = 1.0;

  static MzmParams from_vpi_l(double vpi_l_v_cm, double length_mm);
};

struct CrowFilterSpec {
  int order = 2;
  double bandwidth_3db = 6.5e9;
  double center_offset = 0.0;
  double il_db = 1.6;
};

// Gray map: 00 -> e^{i pi/4}, 01 -> e^{i 3pi/4}, 11 -> e^{i 5pi/4}, 10 -> e^{i 7pi/4}.
std::vector<cplx> qpsk_map(std::span<const std::uint8_t> bits);
// Nearest constellation point, returned as its two bits.
std::array<std::uint8_t, 2> qpsk_demap(cplx symbol);
cplx qpsk_decide(cplx symbol);

struct PulseSlot {
  double center;  // s, wrapped onto the grid period
  cplx symbol;
};

struct IqDrive {
  std::vector<double> i;
  std::vector<double> q;
};

IqDrive soliton_drive(std::span<const PulseSlot> pulses, const SolitonParams& sp,
                      const SignalGrid& grid);

ComplexEnvelope mzm_modulate(double carrier_power, const IqDrive& drive, const MzmParams& mp,
                             const SignalGrid& grid);

// Peak-power attenuation (dB) of an isolated reference soliton against the
// carrier, including insertion loss.
double modulation_penalty_db(const MzmParams& mp, const SolitonParams& sp);

class UnreachableTarget : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

MzmParams calibrate_penalty(const MzmParams& mp, const SolitonParams& sp, double target_db);

ComplexEnvelope crow_filter(const ComplexEnvelope& e, const CrowFilterSpec& spec);

struct TimingSolution {
  double tau_wg = 0.0;
  double tau_awg = 0.0;
  std::array<double, kChannels> centers{};  // within [0, TW)
};

class InfeasibleTiming : public std::invalid_argument {
 public:
  InfeasibleTiming(const std::string& what, double nearest_dt)
      : std::invalid_argument(what), nearest_dt_(nearest_dt) {}
  double nearest_dt() const { return nearest_dt_; }

 private:
  double nearest_dt_;
};

// Channels {1,3} share IQ-MZM A and {2,4} share IQ-MZM B; B's drive lags A by
// tau_awg and channels 1, 2 pass the tau_wg delay line. With channel 3 as the
// reference pulse, the centers are ch3 = c, ch1 = c + tau_wg, ch4 = c + tau_awg,
// ch2 = c + tau_awg + tau_wg (mod TW), and the solver looks for the assignment
// that puts them at Dt/2 + (k-1) Dt.
TimingSolution timing_solve(double dt, double tw,
                            std::span<const double> tau_wg_options = kTauWgOptions);

std::vector<double> equalize_peaks(std::span<const double> per_channel_peaks_dbm);

ComplexEnvelope phase_noise(const ComplexEnvelope& e, double linewidth, std::uint64_t seed);

struct TxHardware {
  double line_power_dbm = 10.0;  // per comb line after the booster EDFA
  double gc_in_il_db = 3.0;
  CrowFilterSpec route{2, 6.5e9, 0.0, 1.6};
  double delay_il_db = 3.0;
  CrowFilterSpec mux{4, 17.5e9, 0.0, 2.0};
  double mmi_il_db = 3.0;
  double tap_il_db = 1.5;
  double gc_out_il_db = 3.0;
};

enum class TxMode { hardware_faithful, idealized };

struct ChannelTruth {
  std::vector<cplx> symbols;
  std::vector<double> centers;  // s, mod block duration
  std::vector<std::uint8_t> bits;
};

struct TxOutput {
  ComplexEnvelope output;
  std::array<ChannelTruth, kChannels> truth;
  std::array<double, kChannels> channel_peak_dbm{};
  std::size_t n_windows = 0;
};

// Number of transmission windows a bit block fills in the given mode.
std::size_t windows_for_bits(std::size_t n_bits, TxMode mode);

TxOutput assemble_tx(std::span<const std::uint8_t> bits, const ChannelPlan& plan,
                     const SolitonParams& sp, const MzmParams& mp, const TxHardware& hw,
                     TxMode mode, double sample_rate, std::uint64_t seed = 0);

}  // namespace nlftlink

#include "nlftlink/records.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace nlftlink {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_results_csv(std::ostream& os, std::span<const ResultRow> rows) {
  os << "distance_km,dt_ps,seed,ber_ch1,ber_ch2,ber_ch3,ber_ch4,ber_avg,osnr_db,n_eigenvalue_failures\n";
  for (const auto& r : rows) {
    os << format_number(r.distance_km) << ',' << format_number(r.dt_ps) << ',' << r.seed;
    for (double b : r.ber) os << ',' << format_number(b);
    os << ',' << format_number(r.ber_avg) << ',' << format_number(r.osnr_db) << ','
       << r.n_eigenvalue_failures << '\n';
  }
}

void write_truth_csv(std::ostream& os, const std::array<ChannelTruth, kChannels>& truth) {
  os << "channel,symbol_index,t_center_ps,re,im\n";
  for (int k = 0; k < kChannels; ++k) {
    const auto& t = truth[k];
    for (std::size_t i = 0; i < t.symbols.size(); ++i)
      os << k + 1 << ',' << i << ',' << format_number(t.centers[i] * 1e12) << ','
         << format_number(t.symbols[i].real()) << ',' << format_number(t.symbols[i].imag()) << '\n';
  }
}

void write_diagnostics_csv(std::ostream& os, std::span<const DiagnosticRecord> records) {
  os << "channel,window_index,zeta_re,zeta_im,b_re,b_im,decided_bits,correct\n";
  for (const auto& r : records)
    os << r.channel << ',' << r.window_index << ',' << format_number(r.zeta.real()) << ','
       << format_number(r.zeta.imag()) << ',' << format_number(r.b.real()) << ','
       << format_number(r.b.imag()) << ',' << int(r.decided_bits[0]) << int(r.decided_bits[1]) << ','
       << (r.correct ? 1 : 0) << '\n';
}

void write_eye_csv(std::ostream& os, std::span<const EyeSample> samples) {
  os << "t_fold_ps,abs_field\n";
  for (const auto& s : samples)
    os << format_number(s.t_fold * 1e12) << ',' << format_number(s.magnitude) << '\n';
}

}  // namespace nlftlink

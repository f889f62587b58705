#pragma once

#include <cmath>
#include <limits>

namespace nlftlink {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kPlanck = 6.62607015e-34;  // J*s

inline constexpr double ps = 1e-12;
inline constexpr double GHz = 1e9;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double dbm_to_watt(double dbm) { return 1e-3 * db_to_linear(dbm); }
inline double watt_to_dbm(double w) {
  return w > 0.0 ? linear_to_db(w / 1e-3) : -std::numeric_limits<double>::infinity();
}

// Field (amplitude) factor for a power change given in dB.
inline double db_to_field(double db) { return std::pow(10.0, db / 20.0); }

// dB/km -> 1/km power attenuation coefficient.
inline double alpha_db_to_neper(double alpha_db_per_km) {
  return alpha_db_per_km * std::log(10.0) / 10.0;
}

}  // namespace nlftlink

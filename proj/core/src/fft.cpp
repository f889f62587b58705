#include "nlftlink/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace nlftlink {
namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    // FFTW_ESTIMATE leaves the scratch arrays untouched; FFTW_UNALIGNED lets
    // the plan run on any std::vector storage.
    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void execute(std::span<cplx> data, int sign) {
  if (data.empty()) return;
  fftw_plan plan = cache().get(data.size(), sign);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

}  // namespace

void fft_inplace(std::span<cplx> data) { execute(data, FFTW_FORWARD); }

void ifft_inplace(std::span<cplx> data) {
  execute(data, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
}

std::vector<cplx> fft(std::span<const cplx> data) {
  std::vector<cplx> out(data.begin(), data.end());
  fft_inplace(out);
  return out;
}

std::vector<cplx> ifft(std::span<const cplx> data) {
  std::vector<cplx> out(data.begin(), data.end());
  ifft_inplace(out);
  return out;
}

double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
  const auto half = n / 2;
  const double idx = k < half ? static_cast<double>(k)
                              : static_cast<double>(k) - static_cast<double>(n);
  return idx * sample_rate / static_cast<double>(n);
}

}  // namespace nlftlink

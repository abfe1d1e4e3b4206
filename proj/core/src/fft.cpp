#include "mirpairs/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>

namespace mirpairs {

namespace {

std::mutex g_plan_mutex;

// Plans are cached per (size, direction) and kept for the process lifetime.
// FFTW_UNALIGNED lets one plan serve any std::vector buffer.
fftw_plan plan_for(std::size_t n, int sign) {
  static std::map<std::pair<std::size_t, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<std::complex<double>> dummy(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n),
                                 reinterpret_cast<fftw_complex*>(dummy.data()),
                                 reinterpret_cast<fftw_complex*>(dummy.data()),
                                 sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (p == nullptr) throw std::runtime_error("fft: fftw plan creation failed");
  cache.emplace(key, p);
  return p;
}

void execute(std::vector<std::complex<double>>& data, int sign) {
  if (data.empty()) throw std::invalid_argument("fft: empty input");
  fftw_plan p = plan_for(data.size(), sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                   reinterpret_cast<fftw_complex*>(data.data()));
}

}  // namespace

void fft_forward(std::vector<std::complex<double>>& data) { execute(data, FFTW_FORWARD); }

void fft_inverse(std::vector<std::complex<double>>& data) {
  execute(data, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& v : data) v *= scale;
}

std::vector<double> power_spectrum(const std::vector<std::complex<double>>& envelope) {
  std::vector<std::complex<double>> work(envelope);
  fft_forward(work);
  std::vector<double> psd(work.size());
  for (std::size_t i = 0; i < work.size(); ++i) psd[i] = std::norm(work[i]);
  return psd;
}

}  // namespace mirpairs

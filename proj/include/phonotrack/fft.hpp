#pragma once

// Thin FFTW wrapper. Plans are cached per (size, direction) behind a mutex;
// execution uses the new-array interface so callers never share buffers.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace phonotrack::fft {

using Complex = std::complex<double>;

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* in = fftw_alloc_complex(n);
    auto* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline std::vector<Complex> execute(std::span<const Complex> in, int sign) {
  std::vector<Complex> src(in.begin(), in.end());
  std::vector<Complex> out(in.size());
  if (in.empty()) return out;
  fftw_plan plan = PlanCache::instance().get(in.size(), sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(src.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace detail

/// Unnormalized forward DFT.
inline std::vector<Complex> forward(std::span<const Complex> in) {
  return detail::execute(in, FFTW_FORWARD);
}

/// Inverse DFT, scaled by 1/n so that inverse(forward(x)) == x.
inline std::vector<Complex> inverse(std::span<const Complex> in) {
  auto out = detail::execute(in, FFTW_BACKWARD);
  const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

/// Forward DFT of a real sequence zero-padded (or truncated) to `nfft`.
inline std::vector<Complex> forward_real(std::span<const double> x, std::size_t nfft) {
  std::vector<Complex> buf(nfft);
  for (std::size_t i = 0; i < nfft && i < x.size(); ++i) buf[i] = x[i];
  return forward(buf);
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace phonotrack::fft

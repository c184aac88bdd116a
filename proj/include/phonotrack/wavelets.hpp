#pragma once

// Discrete db4 wavelet shrinkage and analytic continuous wavelet transforms.

#include "phonotrack/error.hpp"
#include "phonotrack/fft.hpp"
#include "phonotrack/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>
#include <utility>

namespace phonotrack::wavelets {

// ---------------------------------------------------------------------------
// db4 discrete transform

/// db4 reconstruction low-pass (minimum phase); analysis filter is its reverse.
inline constexpr std::array<double, 8> kDb4RecLo = {
    0.2303778133088965008632912,   0.714846570552915647089922,
    0.6308807679298589078817163,   -0.02798376941685985421141375,
    -0.1870348117190930840795707,  0.03084138183556076362721936,
    0.03288301166688519973540751,  -0.01059740178506903210488321,
};

struct Db4Filters {
  std::array<double, 8> dec_lo{}, dec_hi{}, rec_lo{}, rec_hi{};
};

inline Db4Filters db4_filters() {
  Db4Filters f;
  f.rec_lo = kDb4RecLo;
  for (std::size_t k = 0; k < 8; ++k) {
    f.dec_lo[k] = kDb4RecLo[7 - k];
    // Quadrature mirror: rec_hi[k] = (-1)^k rec_lo[7-k]
    f.rec_hi[k] = ((k % 2 == 0) ? 1.0 : -1.0) * kDb4RecLo[7 - k];
  }
  for (std::size_t k = 0; k < 8; ++k) f.dec_hi[k] = f.rec_hi[7 - k];
  return f;
}

struct DwtLevel {
  std::vector<double> approx;
  std::vector<double> detail;
};

namespace detail {

/// Half-sample symmetric extension: x[-1] = x[0], x[n] = x[n-1].
inline double symmetric_at(std::span<const double> x, long long k) {
  const auto n = static_cast<long long>(x.size());
  const long long period = 2 * n;
  long long j = k % period;
  if (j < 0) j += period;
  return j < n ? x[static_cast<std::size_t>(j)] : x[static_cast<std::size_t>(period - 1 - j)];
}

}  // namespace detail

/// One analysis step; output length floor((n + 7) / 2).
inline DwtLevel dwt_step(std::span<const double> x, const Db4Filters& f) {
  const std::size_t n_out = (x.size() + 7) / 2;
  DwtLevel out{std::vector<double>(n_out), std::vector<double>(n_out)};
  for (std::size_t i = 0; i < n_out; ++i) {
    double a = 0.0, d = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      const double v = detail::symmetric_at(x, 2 * static_cast<long long>(i) + 1 - static_cast<long long>(j));
      a += f.dec_lo[j] * v;
      d += f.dec_hi[j] * v;
    }
    out.approx[i] = a;
    out.detail[i] = d;
  }
  return out;
}

/// Inverse of dwt_step, producing `n` samples.
inline std::vector<double> idwt_step(std::span<const double> approx, std::span<const double> det,
                                     std::size_t n, const Db4Filters& f) {
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    // taps m = k + 6 - 2i in [0, 7]
    const long long top = static_cast<long long>(k) + 6;
    for (long long i = std::max(0LL, (top - 7 + 1) / 2); 2 * i <= top; ++i) {
      if (i >= static_cast<long long>(approx.size())) break;
      const auto m = static_cast<std::size_t>(top - 2 * i);
      acc += approx[static_cast<std::size_t>(i)] * f.rec_lo[m] +
             det[static_cast<std::size_t>(i)] * f.rec_hi[m];
    }
    x[k] = acc;
  }
  return x;
}

/// Multi-level decomposition: details[0] is the finest band.
struct Decomposition {
  std::vector<double> approx;
  std::vector<std::vector<double>> details;
  std::vector<std::size_t> lengths;  ///< signal length entering each level
};

inline Decomposition wavedec(std::span<const double> x, int levels) {
  if (levels < 1) fail(ErrorCode::InvalidInput, "wavedec: levels must be >= 1");
  if (x.size() < (std::size_t{1} << levels))
    fail(ErrorCode::DecompositionDepth, "wavedec: " + std::to_string(x.size()) +
                                            " samples cannot support " + std::to_string(levels) +
                                            " levels");
  const auto f = db4_filters();
  Decomposition dec;
  std::vector<double> cur(x.begin(), x.end());
  for (int l = 0; l < levels; ++l) {
    dec.lengths.push_back(cur.size());
    auto step = dwt_step(cur, f);
    dec.details.push_back(std::move(step.detail));
    cur = std::move(step.approx);
  }
  dec.approx = std::move(cur);
  return dec;
}

inline std::vector<double> waverec(const Decomposition& dec) {
  const auto f = db4_filters();
  std::vector<double> cur = dec.approx;
  for (std::size_t l = dec.details.size(); l-- > 0;)
    cur = idwt_step(cur, dec.details[l], dec.lengths[l], f);
  return cur;
}

inline double soft_threshold(double v, double tau) {
  const double m = std::abs(v) - tau;
  return m > 0.0 ? std::copysign(m, v) : 0.0;
}

/// Wavelet shrinkage: each detail band is soft-thresholded at
/// threshold_frac * max|coefficient| of that band; approximation untouched.
inline SampledSignal dwt_denoise_db4(const SampledSignal& s, int levels = 8,
                                     double threshold_frac = 0.15) {
  validate(s, "dwt_denoise_db4");
  if (!(threshold_frac >= 0.0 && threshold_frac < 1.0))
    fail(ErrorCode::InvalidInput, "dwt_denoise_db4: threshold_frac must lie in [0, 1)");
  auto dec = wavedec(s.samples, levels);
  if (threshold_frac > 0.0) {
    for (auto& band : dec.details) {
      const double tau = threshold_frac * max_abs(band);
      for (double& c : band) c = soft_threshold(c, tau);
    }
  }
  SampledSignal out{waverec(dec), s.rate_hz, s.label};
  return out;
}

// ---------------------------------------------------------------------------
// Continuous transform

enum class WaveletFamily { Morlet, Morse, Bump };

inline std::string_view to_string(WaveletFamily f) {
  switch (f) {
    case WaveletFamily::Morlet: return "morlet";
    case WaveletFamily::Morse: return "morse";
    case WaveletFamily::Bump: return "bump";
  }
  return "morlet";
}

/// Analytic wavelet defined by its Fourier transform on positive frequencies.
/// Parameters: Morlet (p1 = center radian frequency), Morse (p1 = gamma,
/// p2 = beta), Bump (p1 = mu, p2 = sigma). Every family peaks at value 2.
struct WaveletKind {
  WaveletFamily family = WaveletFamily::Morlet;
  double p1 = 6.0;
  double p2 = 0.0;

  static WaveletKind morlet(double center = 6.0) { return {WaveletFamily::Morlet, center, 0.0}; }
  static WaveletKind morse(double gamma = 3.0, double beta = 20.0) {
    return {WaveletFamily::Morse, gamma, beta};
  }
  static WaveletKind bump(double mu = 5.0, double sigma = 0.6) {
    return {WaveletFamily::Bump, mu, sigma};
  }

  void check() const {
    if (!(p1 > 0.0) || (family != WaveletFamily::Morlet && !(p2 > 0.0)))
      fail(ErrorCode::InvalidInput, "wavelet shape parameters must be positive");
    if (family == WaveletFamily::Bump && p2 >= p1)
      fail(ErrorCode::InvalidInput, "bump wavelet needs sigma < mu");
  }

  /// Fourier transform at radian frequency w (per unit scale-1 time).
  double spectrum(double w) const {
    if (w <= 0.0) return 0.0;
    switch (family) {
      case WaveletFamily::Morlet: {
        const double d = w - p1;
        return 2.0 * std::exp(-0.5 * d * d);
      }
      case WaveletFamily::Morse: {
        const double gamma = p1, beta = p2;
        const double log_a = std::log(2.0) + (beta / gamma) * (1.0 + std::log(gamma / beta));
        return std::exp(log_a + beta * std::log(w) - std::pow(w, gamma));
      }
      case WaveletFamily::Bump: {
        const double u = (w - p1) / p2;
        if (std::abs(u) >= 1.0) return 0.0;
        return 2.0 * std::exp(1.0 - 1.0 / (1.0 - u * u));
      }
    }
    return 0.0;
  }

  /// Radian frequency at which spectrum() peaks.
  double peak_frequency() const {
    switch (family) {
      case WaveletFamily::Morlet: return p1;
      case WaveletFamily::Morse: return std::pow(p2 / p1, 1.0 / p1);
      case WaveletFamily::Bump: return p1;
    }
    return p1;
  }

  /// RMS time spread of the scale-1 wavelet, from the spectral derivative.
  double time_spread() const {
    const double w_hi = peak_frequency() * 4.0 + 20.0;
    const int steps = 20000;
    const double dw = w_hi / steps;
    double num = 0.0, den = 0.0;
    for (int i = 1; i < steps; ++i) {
      const double w = i * dw;
      const double v = spectrum(w);
      const double dv = (spectrum(w + 0.5 * dw) - spectrum(w - 0.5 * dw)) / dw;
      num += dv * dv;
      den += v * v;
    }
    return den > 0.0 ? std::sqrt(num / den) : 1.0;
  }
};

/// Scales with matching pseudo-frequencies, ordered from high to low frequency.
struct ScaleGrid {
  std::vector<double> scales;          ///< in samples
  std::vector<double> pseudo_freqs_hz;
};

/// Log-spaced grid of `count` pseudo-frequencies between f_lo and f_hi.
inline ScaleGrid make_scale_grid(const WaveletKind& kind, double rate_hz, double f_lo = 10.0,
                                 double f_hi = 500.0, std::size_t count = 64) {
  kind.check();
  if (!(f_lo > 0.0) || !(f_hi > f_lo) || count < 2 || !(f_hi < rate_hz / 2.0))
    fail(ErrorCode::InvalidGrid, "scale grid needs 0 < f_lo < f_hi < Nyquist and >= 2 scales");
  ScaleGrid g;
  const double wc = kind.peak_frequency();
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    const double f = f_hi * std::pow(f_lo / f_hi, t);
    g.pseudo_freqs_hz.push_back(f);
    g.scales.push_back(wc * rate_hz / (2.0 * std::numbers::pi * f));
  }
  return g;
}

inline void validate_grid(const ScaleGrid& g) {
  if (g.scales.empty() || g.scales.size() != g.pseudo_freqs_hz.size())
    fail(ErrorCode::InvalidGrid, "cwt: empty or inconsistent scale grid");
  for (std::size_t i = 0; i < g.scales.size(); ++i) {
    if (!(g.scales[i] > 0.0)) fail(ErrorCode::InvalidGrid, "cwt: scales must be positive");
    if (i > 0 && !(g.scales[i] > g.scales[i - 1]))
      fail(ErrorCode::InvalidGrid, "cwt: scales must increase (frequencies decrease)");
  }
}

struct CwtResult {
  std::vector<std::vector<std::complex<double>>> coefficients;  ///< [scale][time]
  ScaleGrid grid;
  std::vector<std::size_t> support;  ///< edge half-width per scale, samples

  /// False within one wavelet support of either end of the signal.
  bool valid(std::size_t scale_index, std::size_t n) const {
    const std::size_t len = coefficients.empty() ? 0 : coefficients.front().size();
    const std::size_t h = support[scale_index];
    return n >= h && n + h < len;
  }
};

namespace detail {

/// Smallest 2^a 3^b 5^c >= n.
inline std::size_t next_smooth(std::size_t n) {
  std::size_t best = fft::next_pow2(n);
  for (std::size_t p5 = 1; p5 < best; p5 *= 5)
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v *= 2;
      best = std::min(best, v);
    }
  return best;
}

/// Radian-frequency interval outside which the scale-1 spectrum is below
/// 1e-16 of its peak.
inline std::pair<double, double> spectral_support(const WaveletKind& kind) {
  const double peak = kind.peak_frequency();
  const double floor = 2.0e-16;
  double lo = peak, hi = peak;
  const double step = peak * 1e-3;
  while (lo > step && kind.spectrum(lo) > floor) lo -= step;
  while (kind.spectrum(hi) > floor) hi += step;
  return {std::max(0.0, lo - step), hi + step};
}

/// Calls row(scale_index, coefficients) for each scale in grid order; the
/// span is only valid during the call.
template <typename RowFn>
std::vector<std::size_t> cwt_rows(const SampledSignal& s, const WaveletKind& kind, const ScaleGrid& grid,
                                  RowFn&& row) {
  validate(s, "cwt");
  kind.check();
  validate_grid(grid);
  const std::size_t n = s.size();
  const double spread = kind.time_spread();
  std::vector<std::size_t> support;
  std::size_t max_support = 0;
  for (double sc : grid.scales) {
    const auto h = static_cast<std::size_t>(std::ceil(4.0 * spread * sc)) + 1;
    support.push_back(h);
    max_support = std::max(max_support, h);
  }
  const std::size_t nfft = next_smooth(n + 2 * max_support);
  const auto spectrum = fft::forward_real(s.samples, nfft);
  const auto [w_lo, w_hi] = spectral_support(kind);
  const double bin = 2.0 * std::numbers::pi / static_cast<double>(nfft);

  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t j = 0; j < grid.scales.size(); ++j) {
    const double sc = grid.scales[j];
    const double norm = std::sqrt(sc);
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    const auto k_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(w_lo / (sc * bin))));
    const auto k_hi = std::min<std::size_t>(nfft / 2 - 1, static_cast<std::size_t>(std::ceil(w_hi / (sc * bin))));
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
      const double psi = kind.spectrum(sc * bin * static_cast<double>(k));
      if (psi != 0.0) buf[k] = spectrum[k] * (norm * psi);
    }
    const auto coef = fft::inverse(buf);
    row(j, std::span<const std::complex<double>>(coef.data(), n));
  }
  return support;
}

}  // namespace detail

/// CWT(n, s) = 1/sqrt(s) * sum_i x(i) conj(psi((i - n)/s)), evaluated with a
/// zero-padded FFT large enough that no wrap-around occurs.
inline CwtResult cwt(const SampledSignal& s, const WaveletKind& kind, const ScaleGrid& grid) {
  CwtResult out;
  out.grid = grid;
  out.coefficients.resize(grid.scales.size());
  out.support = detail::cwt_rows(s, kind, grid, [&](std::size_t j, std::span<const std::complex<double>> c) {
    out.coefficients[j].assign(c.begin(), c.end());
  });
  return out;
}

/// Wavelet energy spectrum: WES(n) = (1/N) * sum over scales |CWT(n, k)|^2.
inline SampledSignal wes(const SampledSignal& s, const WaveletKind& kind, const ScaleGrid& grid) {
  const std::size_t n = s.size();
  SampledSignal out{std::vector<double>(n, 0.0), s.rate_hz, SignalLabel::ENVELOPE};
  detail::cwt_rows(s, kind, grid, [&](std::size_t, std::span<const std::complex<double>> c) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] += std::norm(c[i]);
  });
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& v : out.samples) v *= inv_n;
  return out;
}

}  // namespace phonotrack::wavelets

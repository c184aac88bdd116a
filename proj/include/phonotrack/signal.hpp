#pragma once

// Waveform representation and the shared preprocessing primitives:
// detrending, max-abs normalization, rational resampling, framing and
// zero-phase Butterworth low-pass filtering.

#include "phonotrack/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phonotrack {

enum class SignalLabel { PCG, ECG, ENVELOPE, OTHER };

inline std::string_view to_string(SignalLabel label) {
  switch (label) {
    case SignalLabel::PCG: return "PCG";
    case SignalLabel::ECG: return "ECG";
    case SignalLabel::ENVELOPE: return "ENVELOPE";
    case SignalLabel::OTHER: return "OTHER";
  }
  return "OTHER";
}

/// Uniformly sampled real waveform.
struct SampledSignal {
  std::vector<double> samples;
  double rate_hz = 1.0;
  SignalLabel label = SignalLabel::OTHER;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double duration_s() const noexcept { return static_cast<double>(samples.size()) / rate_hz; }
};

/// Throws unless the signal is non-empty, has a positive rate and finite samples.
inline void validate(const SampledSignal& s, std::string_view what = "signal") {
  if (!(s.rate_hz > 0.0) || !std::isfinite(s.rate_hz))
    fail(ErrorCode::InvalidInput, std::string(what) + ": sampling rate must be positive");
  if (s.samples.empty()) fail(ErrorCode::InvalidInput, std::string(what) + ": empty signal");
  for (double v : s.samples)
    if (!std::isfinite(v)) fail(ErrorCode::InvalidInput, std::string(what) + ": non-finite sample");
}

inline double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// ---------------------------------------------------------------------------
// Detrend / normalize

/// Removes the least-squares line through (index, sample).
inline SampledSignal detrend(const SampledSignal& s) {
  if (s.samples.empty()) fail(ErrorCode::InvalidInput, "detrend: empty signal");
  const std::size_t n = s.size();
  SampledSignal out = s;
  if (n == 1) {
    out.samples[0] = 0.0;
    return out;
  }
  // Centered index keeps the normal equations diagonal.
  const double tc = (static_cast<double>(n) - 1.0) / 2.0;
  double sy = 0.0, sty = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - tc;
    sy += s.samples[i];
    sty += t * s.samples[i];
    stt += t * t;
  }
  const double intercept = sy / static_cast<double>(n);
  const double slope = sty / stt;
  for (std::size_t i = 0; i < n; ++i)
    out.samples[i] = s.samples[i] - (intercept + slope * (static_cast<double>(i) - tc));
  return out;
}

struct NormalizedSignal {
  SampledSignal signal;
  double scale = 1.0;  ///< factor the input was multiplied by (1 / max|x|)
};

inline NormalizedSignal normalize_max_abs(const SampledSignal& s) {
  const double m = max_abs(s.samples);
  if (!(m > 0.0)) fail(ErrorCode::DegenerateSignal, "normalize_max_abs: all-zero signal");
  NormalizedSignal out{s, 1.0 / m};
  for (double& v : out.signal.samples) v /= m;
  return out;
}

// ---------------------------------------------------------------------------
// Rational resampling

struct Ratio {
  long long up = 1;
  long long down = 1;
};

/// Finds up/down with down <= max_den such that target/source == up/down.
inline Ratio rational_ratio(double source_hz, double target_hz, long long max_den = 10'000) {
  if (!(source_hz > 0.0) || !(target_hz > 0.0))
    fail(ErrorCode::InvalidInput, "resample: rates must be positive");
  const double r = target_hz / source_hz;
  for (long long q = 1; q <= max_den; ++q) {
    const double p = std::round(r * static_cast<double>(q));
    if (p >= 1.0 && std::abs(p - r * static_cast<double>(q)) <= 1e-9 * std::max(1.0, p)) {
      auto up = static_cast<long long>(p);
      const long long g = std::gcd(up, q);
      return {up / g, q / g};
    }
  }
  fail(ErrorCode::UnsupportedRatio, "resample: ratio not representable with denominator <= " +
                                        std::to_string(max_den));
}

namespace detail {

inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

/// Kaiser-windowed sinc low-pass; cutoff and transition width in cycles/sample.
inline std::vector<double> kaiser_lowpass(double cutoff, double transition, double atten_db) {
  const double beta = atten_db > 50.0   ? 0.1102 * (atten_db - 8.7)
                      : atten_db >= 21.0 ? 0.5842 * std::pow(atten_db - 21.0, 0.4) +
                                               0.07886 * (atten_db - 21.0)
                                         : 0.0;
  auto taps = static_cast<std::size_t>(
      std::ceil((atten_db - 7.95) / (2.285 * 2.0 * std::numbers::pi * transition)));
  taps |= 1U;  // odd length, integer group delay
  std::vector<double> h(taps);
  const double mid = static_cast<double>(taps - 1) / 2.0;
  const double i0b = bessel_i0(beta);
  for (std::size_t k = 0; k < taps; ++k) {
    const double t = static_cast<double>(k) - mid;
    const double sinc = t == 0.0 ? 2.0 * cutoff
                                 : std::sin(2.0 * std::numbers::pi * cutoff * t) /
                                       (std::numbers::pi * t);
    const double ratio = t / mid;
    const double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) / i0b;
    h[k] = sinc * w;
  }
  return h;
}

}  // namespace detail

/// Polyphase upsample-filter-downsample. The anti-alias filter passes up to
/// 0.8 x the lower Nyquist and is >= 60 dB down from 0.9 x that Nyquist.
inline SampledSignal resample_rational(const SampledSignal& s, double target_rate_hz) {
  validate(s, "resample_rational");
  const Ratio ratio = rational_ratio(s.rate_hz, target_rate_hz);
  if (ratio.up == ratio.down) {
    SampledSignal out = s;
    out.rate_hz = target_rate_hz;
    return out;
  }
  const auto up = static_cast<std::size_t>(ratio.up);
  const auto down = static_cast<std::size_t>(ratio.down);
  // Normalized to the upsampled rate: Nyquist of the slower side is 0.5 / max(up, down).
  const double nyq = 0.5 / static_cast<double>(std::max(up, down));
  const std::vector<double> h = detail::kaiser_lowpass(0.85 * nyq, 0.1 * nyq, 60.0);
  const std::size_t taps = h.size();
  const std::size_t delay = (taps - 1) / 2;
  const std::size_t n = s.size();
  const std::size_t n_out = (n * up + down - 1) / down;

  SampledSignal out{std::vector<double>(n_out, 0.0), target_rate_hz, s.label};
  const auto gain = static_cast<double>(up);
  for (std::size_t m = 0; m < n_out; ++m) {
    const std::size_t t = m * down + delay;  // position on the upsampled grid
    // Input samples i contribute through tap k = t - i*up, 0 <= k < taps.
    const std::size_t i_hi = std::min(t / up, n - 1);
    const std::size_t i_lo = t + 1 > taps ? (t + 1 - taps + up - 1) / up : 0;
    double acc = 0.0;
    for (std::size_t i = i_lo; i <= i_hi && i_lo <= i_hi; ++i) acc += s.samples[i] * h[t - i * up];
    out.samples[m] = gain * acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Framing

struct FramePlan {
  double frame_len_s = 4.0;
  double hop_s = 4.0;
};

struct Frame {
  SampledSignal signal;
  double start_s = 0.0;
  std::size_t index = 0;
};

/// Cuts the signal into frames of round(frame_len_s * rate) samples.
/// A trailing partial frame is discarded.
inline std::vector<Frame> segment_frames(const SampledSignal& s, const FramePlan& plan) {
  if (!(plan.frame_len_s > 0.0) || !(plan.hop_s > 0.0) || plan.hop_s > plan.frame_len_s)
    fail(ErrorCode::InvalidInput, "segment_frames: need 0 < hop_s <= frame_len_s");
  const auto len = static_cast<std::size_t>(std::llround(plan.frame_len_s * s.rate_hz));
  const auto hop = static_cast<std::size_t>(std::llround(plan.hop_s * s.rate_hz));
  if (len < 2 || hop < 1) fail(ErrorCode::InvalidInput, "segment_frames: frame shorter than 2 samples");
  if (s.size() < len)
    fail(ErrorCode::TooShort, "segment_frames: signal (" + std::to_string(s.duration_s()) +
                                  " s) shorter than one frame");
  std::vector<Frame> frames;
  for (std::size_t start = 0, k = 0; start + len <= s.size(); start += hop, ++k) {
    Frame f;
    f.signal.rate_hz = s.rate_hz;
    f.signal.label = s.label;
    f.signal.samples.assign(s.samples.begin() + static_cast<std::ptrdiff_t>(start),
                            s.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
    f.start_s = static_cast<double>(start) / s.rate_hz;
    f.index = k;
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Butterworth low-pass, second-order sections

/// Direct-form II transposed biquad, normalized so a0 == 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

/// Digital Butterworth low-pass via the bilinear transform with prewarping.
/// Every section has unity DC gain.
inline std::vector<Biquad> butterworth_lowpass(double cutoff_hz, double rate_hz, int order) {
  if (order < 1) fail(ErrorCode::InvalidInput, "butterworth: order must be >= 1");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0))
    fail(ErrorCode::InvalidCutoff, "butterworth: cutoff must lie in (0, Nyquist)");
  const double fs2 = 2.0 * rate_hz;
  const double wc = fs2 * std::tan(std::numbers::pi * cutoff_hz / rate_hz);
  std::vector<Biquad> sections;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const std::complex<double> p = wc * std::polar(1.0, theta);
    const std::complex<double> z = (fs2 + p) / (fs2 - p);
    const double a1 = -2.0 * z.real();
    const double a2 = std::norm(z);
    const double g = (1.0 + a1 + a2) / 4.0;  // zeros at z = -1, unit DC gain
    sections.push_back({g, 2.0 * g, g, a1, a2});
  }
  if (order % 2 == 1) {
    const double z = (fs2 - wc) / (fs2 + wc);
    const double g = (1.0 - z) / 2.0;
    sections.push_back({g, g, 0.0, -z, 0.0});
  }
  return sections;
}

namespace detail {

/// Runs the cascade with steady-state initial conditions for input x[0].
inline void sos_filter_inplace(std::span<const Biquad> sos, std::vector<double>& x) {
  if (x.empty()) return;
  const double x0 = x.front();
  for (const auto& bq : sos) {
    double z1 = (1.0 - bq.b0) * x0;
    double z2 = (bq.b2 - bq.a2) * x0;
    for (double& v : x) {
      const double in = v;
      const double y = bq.b0 * in + z1;
      z1 = bq.b1 * in - bq.a1 * y + z2;
      z2 = bq.b2 * in - bq.a2 * y;
      v = y;
    }
  }
}

/// Samples until the impulse response stays below 1e-9 of its peak.
inline std::size_t settle_length(std::span<const Biquad> sos, std::size_t cap) {
  std::vector<double> h(cap, 0.0);
  h[0] = 1.0;
  for (const auto& bq : sos) {
    double z1 = 0, z2 = 0;
    for (double& v : h) {
      const double y = bq.b0 * v + z1;
      z1 = bq.b1 * v - bq.a1 * y + z2;
      z2 = bq.b2 * v - bq.a2 * y;
      v = y;
    }
  }
  double peak = 0;
  for (double v : h) peak = std::max(peak, std::abs(v));
  std::size_t last = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (std::abs(h[i]) > 1e-9 * peak) last = i;
  return last + 1;
}

}  // namespace detail

/// Forward-backward Butterworth low-pass (squared magnitude, zero phase).
/// Edges are extended by odd reflection over three settle lengths.
inline SampledSignal butterworth_lowpass_zero_phase(const SampledSignal& s, double cutoff_hz,
                                                    int order) {
  validate(s, "butterworth_lowpass_zero_phase");
  const auto sos = butterworth_lowpass(cutoff_hz, s.rate_hz, order);
  const std::size_t n = s.size();
  const auto cap = static_cast<std::size_t>(std::ceil(50.0 * order * s.rate_hz / cutoff_hz)) + 16;
  const std::size_t want = 3 * detail::settle_length(sos, cap);

  // Odd reflection 2*x0 - x[k]. Requests longer than the signal fold the
  // mirror index back into range.
  const std::size_t period = n > 1 ? 2 * (n - 1) : 1;
  auto fold = [&](std::size_t k) {
    const std::size_t j = k % period;
    return j <= n - 1 ? j : period - j;
  };
  auto reflect_left = [&](std::size_t k) { return 2.0 * s.samples.front() - s.samples[fold(k)]; };
  auto reflect_right = [&](std::size_t k) {
    return 2.0 * s.samples.back() - s.samples[n - 1 - fold(k)];
  };

  const std::size_t pad = n > 1 ? want : 0;
  std::vector<double> x;
  x.reserve(n + 2 * pad);
  for (std::size_t k = pad; k >= 1; --k) x.push_back(reflect_left(k));
  x.insert(x.end(), s.samples.begin(), s.samples.end());
  for (std::size_t k = 1; k <= pad; ++k) x.push_back(reflect_right(k));

  detail::sos_filter_inplace(sos, x);
  std::reverse(x.begin(), x.end());
  detail::sos_filter_inplace(sos, x);
  std::reverse(x.begin(), x.end());

  SampledSignal out{std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(pad),
                                        x.begin() + static_cast<std::ptrdiff_t>(pad + n)),
                    s.rate_hz, s.label};
  return out;
}

}  // namespace phonotrack

#pragma once

// Recording-quality measures: spectral band, spectrogram, MFCC, WES-vs-ES
// NRMSE and burst-vs-background SNR.

#include "phonotrack/envelopes.hpp"
#include "phonotrack/error.hpp"
#include "phonotrack/fft.hpp"
#include "phonotrack/segmentation.hpp"
#include "phonotrack/signal.hpp"
#include "phonotrack/wavelets.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

namespace phonotrack::quality {

struct Band {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

/// Lowest and highest non-DC frequency whose Hann-windowed magnitude reaches
/// rel_threshold of the spectral peak (FFT zero-padded to a power of two).
inline Band fft_band(const SampledSignal& frame, double rel_threshold = 0.05) {
  validate(frame, "fft_band");
  if (frame.size() < 256) fail(ErrorCode::TooShort, "fft_band: need >= 256 samples");
  const std::size_t n = frame.size();
  const std::size_t nfft = fft::next_pow2(n);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = frame.samples[i] *
           (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
  const auto spec = fft::forward_real(w, nfft);
  const std::size_t half = nfft / 2;
  std::vector<double> mag(half + 1);
  for (std::size_t k = 0; k <= half; ++k) mag[k] = std::abs(spec[k]);
  double peak = 0.0;
  for (std::size_t k = 1; k <= half; ++k) peak = std::max(peak, mag[k]);
  if (!(peak > 0.0)) fail(ErrorCode::DegenerateSignal, "fft_band: no spectral energy");
  const double thr = rel_threshold * peak;
  std::size_t lo = half, hi = 1;
  for (std::size_t k = 1; k <= half; ++k) {
    if (mag[k] >= thr) {
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
  }
  const double df = frame.rate_hz / static_cast<double>(nfft);
  return {static_cast<double>(lo) * df, static_cast<double>(hi) * df};
}

inline std::vector<double> periodic_hann(std::size_t len) {
  std::vector<double> w(len);
  for (std::size_t i = 0; i < len; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
  return w;
}

/// |STFT| with bins 0..window_len/2; magnitude[col][bin].
struct Spectrogram {
  std::vector<std::vector<double>> magnitude;
  std::vector<double> times_s;  ///< window centres
  std::vector<double> freqs_hz;
  std::size_t window_len = 256;
  std::size_t hop = 128;
  /// |X|^2 * psd_scale is a one-sided-style power spectral density per bin
  /// (before doubling): 1 / (rate * sum(w^2)).
  double psd_scale = 0.0;
};

inline Spectrogram spectrogram_stft(const SampledSignal& frame, std::size_t window_len = 256,
                                    double overlap = 0.5) {
  validate(frame, "spectrogram_stft");
  if (window_len < 2 || !(overlap >= 0.0 && overlap < 1.0))
    fail(ErrorCode::ConfigError, "spectrogram_stft: bad window/overlap");
  if (frame.size() < window_len) fail(ErrorCode::TooShort, "spectrogram_stft: frame shorter than window");
  Spectrogram sg;
  sg.window_len = window_len;
  sg.hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_len * (1.0 - overlap))));
  const auto w = periodic_hann(window_len);
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  sg.psd_scale = 1.0 / (frame.rate_hz * w2);
  const std::size_t cols = (frame.size() - window_len) / sg.hop + 1;
  const std::size_t bins = window_len / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k)
    sg.freqs_hz.push_back(static_cast<double>(k) * frame.rate_hz / static_cast<double>(window_len));
  std::vector<double> seg(window_len);
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t start = c * sg.hop;
    for (std::size_t i = 0; i < window_len; ++i) seg[i] = frame.samples[start + i] * w[i];
    const auto spec = fft::forward_real(seg, window_len);
    std::vector<double> col(bins);
    for (std::size_t k = 0; k < bins; ++k) col[k] = std::abs(spec[k]);
    sg.magnitude.push_back(std::move(col));
    sg.times_s.push_back((static_cast<double>(start) + static_cast<double>(window_len) / 2.0) / frame.rate_hz);
  }
  return sg;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular mel filters over bins 0..nfft/2, spanning 0 Hz to Nyquist.
inline std::vector<std::vector<double>> mel_filterbank(std::size_t n_filters, std::size_t nfft,
                                                       double rate_hz) {
  const std::size_t bins = nfft / 2 + 1;
  const double mel_hi = hz_to_mel(rate_hz / 2.0);
  std::vector<double> edges(n_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_filters + 1));
  std::vector<std::vector<double>> fb(n_filters, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < n_filters; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * rate_hz / static_cast<double>(nfft);
      if (f > l && f < c) fb[m][k] = (f - l) / (c - l);
      else if (f >= c && f < r) fb[m][k] = (r - f) / (r - c);
    }
  }
  return fb;
}

inline constexpr double kMelEnergyFloor = 1e-10;

/// MFCC per STFT column: mel filter energies of |X|^2, natural log with a
/// floor, orthonormal DCT-II, first n_coeffs kept. Result[col][coeff].
inline std::vector<std::vector<double>> mfcc(const SampledSignal& frame, std::size_t n_filters = 26,
                                             std::size_t n_coeffs = 13, std::size_t window_len = 256,
                                             double overlap = 0.5) {
  if (n_coeffs > n_filters || n_filters == 0)
    fail(ErrorCode::ConfigError, "mfcc: n_coeffs must not exceed n_filters");
  const auto sg = spectrogram_stft(frame, window_len, overlap);
  const auto fb = mel_filterbank(n_filters, window_len, frame.rate_hz);
  std::vector<std::vector<double>> out;
  std::vector<double> logs(n_filters);
  const double M = static_cast<double>(n_filters);
  for (const auto& col : sg.magnitude) {
    for (std::size_t m = 0; m < n_filters; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < col.size(); ++k) e += fb[m][k] * col[k] * col[k];
      logs[m] = std::log(std::max(e, kMelEnergyFloor));
    }
    std::vector<double> c(n_coeffs);
    for (std::size_t q = 0; q < n_coeffs; ++q) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n_filters; ++m)
        acc += logs[m] * std::cos(std::numbers::pi * static_cast<double>(q) *
                                  (static_cast<double>(m) + 0.5) / M);
      c[q] = acc * (q == 0 ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M));
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// ES(n) = |x(n)|^2.
inline SampledSignal energy_spectrum(const SampledSignal& frame) {
  SampledSignal out{frame.samples, frame.rate_hz, SignalLabel::ENVELOPE};
  for (double& v : out.samples) v = v * v;
  return out;
}

/// sqrt(sum |WES - ES|^2 / sum |ES|^2).
inline double nrmse_wes_vs_es(const SampledSignal& wes, const SampledSignal& es) {
  if (wes.size() != es.size()) fail(ErrorCode::LengthMismatch, "nrmse: lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < es.size(); ++i) {
    const double d = wes.samples[i] - es.samples[i];
    num += d * d;
    den += es.samples[i] * es.samples[i];
  }
  if (!(den > 0.0)) fail(ErrorCode::UndefinedNormalizer, "nrmse: energy spectrum has zero energy");
  return std::sqrt(num / den);
}

/// Rescales a nonnegative series to unit sum (all-zero input is an error).
inline SampledSignal unit_area(const SampledSignal& s) {
  double total = 0.0;
  for (double v : s.samples) total += v;
  if (!(total > 0.0)) fail(ErrorCode::UndefinedNormalizer, "unit_area: series has zero mass");
  SampledSignal out = s;
  for (double& v : out.samples) v /= total;
  return out;
}

/// NRMSE between the WES and ES of one frame, both scaled to unit area so the
/// comparison is about shape and timing rather than absolute gain.
inline double frame_nrmse(const SampledSignal& frame, const wavelets::WaveletKind& kind) {
  const auto es = unit_area(energy_spectrum(frame));
  const auto w = unit_area(wes_envelope(frame, kind).track);
  return nrmse_wes_vs_es(w, es);
}

inline constexpr double kSnrCapDb = 60.0;

struct SnrEstimate {
  double snr_db = 0.0;
  bool saturated = false;  ///< background power negligible; value capped
};

/// Mean power within +-window_ms of every labeled peak over mean power
/// elsewhere, in dB.
inline SnrEstimate snr_frame(const SampledSignal& frame, const std::vector<PeakEvent>& peaks,
                             double window_ms = 50.0) {
  validate(frame, "snr_frame");
  const std::size_t n = frame.size();
  std::vector<bool> in(n, false);
  const auto half = static_cast<std::ptrdiff_t>(std::llround(window_ms * 1e-3 * frame.rate_hz));
  for (const auto& pk : peaks) {
    const auto c = static_cast<std::ptrdiff_t>(std::llround(pk.time_s * frame.rate_hz));
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, c - half);
         i <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, c + half); ++i)
      in[static_cast<std::size_t>(i)] = true;
  }
  double ps = 0.0, pn = 0.0;
  std::size_t ns = 0, nn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = frame.samples[i] * frame.samples[i];
    if (in[i]) {
      ps += p;
      ++ns;
    } else {
      pn += p;
      ++nn;
    }
  }
  if (ns == 0 || nn == 0)
    fail(ErrorCode::DegenerateCoverage, "snr_frame: peak windows cover none or all of the frame");
  ps /= static_cast<double>(ns);
  pn /= static_cast<double>(nn);
  if (!(pn > 0.0) || ps / pn > std::pow(10.0, kSnrCapDb / 10.0)) return {kSnrCapDb, true};
  if (!(ps > 0.0)) return {-kSnrCapDb, true};
  return {10.0 * std::log10(ps / pn), false};
}

}  // namespace phonotrack::quality

#pragma once

#include "phonotrack/error.hpp"
#include "phonotrack/fft.hpp"
#include "phonotrack/signal.hpp"
#include "phonotrack/wavelets.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string_view>
#include <vector>

namespace phonotrack {

enum class EnvelopeMethod { Hilbert, Shannon, Wes };

inline std::string_view to_string(EnvelopeMethod m) {
  switch (m) {
    case EnvelopeMethod::Hilbert: return "hilbert";
    case EnvelopeMethod::Shannon: return "shannon";
    case EnvelopeMethod::Wes: return "wes";
  }
  return "hilbert";
}

/// Amplitude track of a PCG frame. `smoothing_cutoff_hz` is 0 until smooth().
struct Envelope {
  SampledSignal track;
  EnvelopeMethod method = EnvelopeMethod::Hilbert;
  double smoothing_cutoff_hz = 0.0;
};

/// Analytic signal by zeroing negative frequencies and doubling positive ones.
inline std::vector<std::complex<double>> analytic_signal(const SampledSignal& s) {
  const std::size_t n = s.size();
  auto spec = fft::forward_real(s.samples, n);
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n) spec[k] *= 2.0;
    else if (2 * k > n) spec[k] = 0.0;
  }
  return fft::inverse(spec);
}

/// e[n] = sqrt(x[n]^2 + xhat[n]^2).
inline Envelope hilbert_envelope(const SampledSignal& frame) {
  validate(frame, "hilbert_envelope");
  const auto z = analytic_signal(frame);
  Envelope e{SampledSignal{std::vector<double>(frame.size()), frame.rate_hz, SignalLabel::ENVELOPE},
             EnvelopeMethod::Hilbert, 0.0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    // The real part of z equals x up to rounding; use x itself.
    const double x = frame.samples[i];
    const double xh = z[i].imag();
    e.track.samples[i] = std::sqrt(x * x + xh * xh);
  }
  return e;
}

inline constexpr double kShannonEpsilon = 1e-12;

/// E = -x^2 log(x^2 + eps) for a single sample.
inline double shannon_energy(double x) {
  const double u = x * x;
  return -u * std::log(u + kShannonEpsilon);
}

/// Shannon energy of a max-normalized frame (unsmoothed).
inline Envelope shannon_energy_envelope(const SampledSignal& frame) {
  validate(frame, "shannon_energy_envelope");
  if (max_abs(frame.samples) > 1.0 + 1e-9)
    fail(ErrorCode::ContractViolation,
         "shannon_energy_envelope: frame must be normalized to max|x| <= 1");
  Envelope e{SampledSignal{std::vector<double>(frame.size()), frame.rate_hz, SignalLabel::ENVELOPE},
             EnvelopeMethod::Shannon, 0.0};
  std::transform(frame.samples.begin(), frame.samples.end(), e.track.samples.begin(),
                 shannon_energy);
  return e;
}

/// WES over the default 10-500 Hz grid (unsmoothed).
inline Envelope wes_envelope(const SampledSignal& frame,
                             const wavelets::WaveletKind& kind = wavelets::WaveletKind::morlet()) {
  validate(frame, "wes_envelope");
  const double f_hi = std::min(500.0, 0.45 * frame.rate_hz);
  const auto grid = wavelets::make_scale_grid(kind, frame.rate_hz, 10.0, f_hi, 64);
  return Envelope{wavelets::wes(frame, kind, grid), EnvelopeMethod::Wes, 0.0};
}

/// Zero-phase Butterworth low-pass; negative excursions clipped to 0.
inline Envelope smooth(const Envelope& e, double cutoff_hz = 20.0, int order = 4) {
  Envelope out = e;
  out.track = butterworth_lowpass_zero_phase(e.track, cutoff_hz, order);
  for (double& v : out.track.samples) v = std::max(0.0, v);
  out.track.label = SignalLabel::ENVELOPE;
  out.smoothing_cutoff_hz = cutoff_hz;
  return out;
}

/// Rescales to max = 1; an all-zero envelope is returned unchanged.
inline Envelope renormalize(const Envelope& e) {
  Envelope out = e;
  const double m = *std::max_element(e.track.samples.begin(), e.track.samples.end());
  if (m > 0.0)
    for (double& v : out.track.samples) v /= m;
  return out;
}

/// Raw envelope of a normalized frame by the requested method.
inline Envelope compute_envelope(const SampledSignal& normalized_frame, EnvelopeMethod method,
                                 const wavelets::WaveletKind& kind = wavelets::WaveletKind::morlet()) {
  switch (method) {
    case EnvelopeMethod::Hilbert: return hilbert_envelope(normalized_frame);
    case EnvelopeMethod::Shannon: return shannon_energy_envelope(normalized_frame);
    case EnvelopeMethod::Wes: return wes_envelope(normalized_frame, kind);
  }
  return hilbert_envelope(normalized_frame);
}

}  // namespace phonotrack

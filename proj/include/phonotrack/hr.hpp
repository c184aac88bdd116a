#pragma once

// Heart rate from ECG (R-R intervals) and from PCG segmentation.

#include "phonotrack/envelopes.hpp"
#include "phonotrack/error.hpp"
#include "phonotrack/segmentation.hpp"
#include "phonotrack/signal.hpp"
#include "phonotrack/wavelets.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phonotrack {

enum class HrSource { Ecg, PcgHilbert, PcgShannon, PcgWes };
enum class HrFormula { Eq7Verbatim, CyclePeriod };

inline std::string_view to_string(HrSource s) {
  switch (s) {
    case HrSource::Ecg: return "ECG";
    case HrSource::PcgHilbert: return "PCG_HILBERT";
    case HrSource::PcgShannon: return "PCG_SHANNON";
    case HrSource::PcgWes: return "PCG_WES";
  }
  return "ECG";
}

inline std::string_view to_string(HrFormula f) {
  return f == HrFormula::Eq7Verbatim ? "eq7" : "cycle";
}

inline HrSource source_for(EnvelopeMethod m) {
  switch (m) {
    case EnvelopeMethod::Hilbert: return HrSource::PcgHilbert;
    case EnvelopeMethod::Shannon: return HrSource::PcgShannon;
    case EnvelopeMethod::Wes: return HrSource::PcgWes;
  }
  return HrSource::PcgHilbert;
}

inline constexpr double kMinPlausibleBpm = 20.0;
inline constexpr double kMaxPlausibleBpm = 240.0;

struct HrEstimate {
  double bpm = 0.0;
  HrSource source = HrSource::Ecg;
  std::size_t frame_index = 0;
  HrFormula formula = HrFormula::CyclePeriod;
  bool out_of_range = false;  ///< outside [20, 240] bpm; excluded from aggregates

  bool accepted() const noexcept { return !out_of_range; }
};

inline HrEstimate make_estimate(double bpm, HrSource src, std::size_t frame, HrFormula formula) {
  HrEstimate e{bpm, src, frame, formula, false};
  e.out_of_range = !(bpm >= kMinPlausibleBpm && bpm <= kMaxPlausibleBpm);
  return e;
}

// ---------------------------------------------------------------------------
// ECG

struct ProminentPeak {
  std::size_t index = 0;
  double prominence = 0.0;
};

/// Local maxima with their topographic prominence: height above the higher of
/// the two lowest points separating the peak from taller terrain (or the ends).
inline std::vector<ProminentPeak> prominent_peaks(std::span<const double> x, double min_prominence) {
  std::vector<ProminentPeak> out;
  const std::size_t n = x.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i]) {
        const std::size_t pk = (i + j) / 2;
        const double h = x[pk];
        double left_min = h;
        for (std::size_t k = pk; k-- > 0;) {
          if (x[k] > h) break;
          left_min = std::min(left_min, x[k]);
        }
        double right_min = h;
        for (std::size_t k = pk + 1; k < n; ++k) {
          if (x[k] > h) break;
          right_min = std::min(right_min, x[k]);
        }
        const double prom = h - std::max(left_min, right_min);
        if (prom >= min_prominence) out.push_back({pk, prom});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

/// Detrend, max-abs normalize, pick R-peaks by prominence, then
/// HR = 60 * fs / mean(R-R interval in samples).
inline HrEstimate hr_from_ecg_frame(const SampledSignal& frame, double prominence = 0.8,
                                    std::size_t frame_index = 0) {
  validate(frame, "hr_from_ecg_frame");
  const auto prepared = normalize_max_abs(detrend(frame)).signal;
  const auto peaks = prominent_peaks(prepared.samples, prominence);
  if (peaks.size() < 2)
    fail(ErrorCode::InsufficientPeaks,
         "hr_from_ecg_frame: " + std::to_string(peaks.size()) + " R-peaks found (need >= 2)");
  const double mean_gap = static_cast<double>(peaks.back().index - peaks.front().index) /
                          static_cast<double>(peaks.size() - 1);
  return make_estimate(60.0 * frame.rate_hz / mean_gap, HrSource::Ecg, frame_index,
                       HrFormula::CyclePeriod);
}

/// R-peak times (seconds) in a whole ECG record, used for stream alignment.
inline std::vector<double> ecg_rpeak_times(const SampledSignal& ecg, double prominence = 0.8,
                                           double frame_len_s = 6.0) {
  std::vector<double> times;
  for (const auto& f : segment_frames(ecg, {frame_len_s, frame_len_s})) {
    const auto prepared = normalize_max_abs(detrend(f.signal)).signal;
    for (const auto& p : prominent_peaks(prepared.samples, prominence))
      times.push_back(f.start_s + static_cast<double>(p.index) / ecg.rate_hz);
  }
  return times;
}

// ---------------------------------------------------------------------------
// PCG

/// Eq7Verbatim: (1/t_sys + 1/t_dias) * 60/2. CyclePeriod: 60 / (t_sys + t_dias).
inline double hr_from_intervals(double t_sys, double t_dias, HrFormula formula) {
  if (!(t_sys > 0.0) || !(t_dias > 0.0) || !std::isfinite(t_sys) || !std::isfinite(t_dias))
    fail(ErrorCode::InvalidSegmentation, "hr_from_pcg: intervals must be positive");
  return formula == HrFormula::Eq7Verbatim ? (1.0 / t_sys + 1.0 / t_dias) * 60.0 / 2.0
                                           : 60.0 / (t_sys + t_dias);
}

inline HrEstimate hr_from_pcg(const CycleSegmentation& seg, HrFormula formula,
                              HrSource source = HrSource::PcgShannon, std::size_t frame_index = 0) {
  return make_estimate(hr_from_intervals(seg.t_sys, seg.t_dias, formula), source, frame_index,
                       formula);
}

struct PipelineParams {
  int denoise_levels = 8;
  double denoise_threshold = 0.15;
  double smoothing_cutoff_hz = 20.0;
  int smoothing_order = 4;
  PeakParams peaks{};
  double baseline_frac = 0.15;
  wavelets::WaveletKind wavelet = wavelets::WaveletKind::morlet();
};

/// Every intermediate of one PCG frame's trip through the HR pipeline.
struct PipelineResult {
  SampledSignal denoised;
  SampledSignal normalized;
  Envelope raw_envelope;
  Envelope envelope;  ///< smoothed and renormalized to max 1
  CycleSegmentation segmentation;
  HrEstimate hr;
};

namespace detail {

template <typename F>
auto run_stage(std::string_view stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_stage(std::string(stage));
  }
}

}  // namespace detail

/// denoise -> normalize -> envelope -> smooth -> renormalize -> segment -> HR.
/// Errors carry the stage that raised them. An all-zero frame passes through
/// normalization unchanged and fails in segmentation.
inline PipelineResult hr_pipeline(const SampledSignal& pcg_frame, EnvelopeMethod method,
                                  HrFormula formula, const PipelineParams& p = {},
                                  std::size_t frame_index = 0) {
  PipelineResult r;
  detail::run_stage("input", [&] { validate(pcg_frame, "pcg frame"); });
  r.denoised = detail::run_stage("denoise", [&] {
    return wavelets::dwt_denoise_db4(pcg_frame, p.denoise_levels, p.denoise_threshold);
  });
  r.normalized = detail::run_stage("normalize", [&] {
    return max_abs(r.denoised.samples) > 0.0 ? normalize_max_abs(r.denoised).signal : r.denoised;
  });
  r.raw_envelope = detail::run_stage(
      "envelope", [&] { return compute_envelope(r.normalized, method, p.wavelet); });
  r.envelope = detail::run_stage("smooth", [&] {
    return renormalize(smooth(r.raw_envelope, p.smoothing_cutoff_hz, p.smoothing_order));
  });
  r.segmentation = detail::run_stage(
      "segmentation", [&] { return segment_cycles(r.envelope, p.peaks, p.baseline_frac); });
  r.hr = detail::run_stage("hr", [&] {
    return hr_from_pcg(r.segmentation, formula, source_for(method), frame_index);
  });
  return r;
}

}  // namespace phonotrack

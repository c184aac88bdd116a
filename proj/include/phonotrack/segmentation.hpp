#pragma once

// Envelope peak picking, S1/S2 labeling and cardiac-cycle timing.

#include "phonotrack/envelopes.hpp"
#include "phonotrack/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace phonotrack {

enum class PeakLabel { S1, S2, Unlabeled };

inline std::string_view to_string(PeakLabel l) {
  switch (l) {
    case PeakLabel::S1: return "S1";
    case PeakLabel::S2: return "S2";
    case PeakLabel::Unlabeled: return "UNLABELED";
  }
  return "UNLABELED";
}

struct PeakEvent {
  std::size_t index = 0;
  double time_s = 0.0;  ///< from frame start
  double height = 0.0;
  PeakLabel label = PeakLabel::Unlabeled;
};

struct PeakParams {
  double min_height_frac = 0.15;
  double min_distance_s = 0.125;
};

/// Local maxima (strictly above both neighbours; a flat top counts once at
/// its centre) of height >= min_height_frac * max, thinned greedily by
/// descending height so no two survivors are closer than min_distance_s.
/// No minimum count is enforced here.
inline std::vector<PeakEvent> find_envelope_peaks(const Envelope& e, const PeakParams& p = {}) {
  const auto& x = e.track.samples;
  const double rate = e.track.rate_hz;
  std::vector<PeakEvent> cand;
  if (x.size() < 3) return cand;
  const double top = *std::max_element(x.begin(), x.end());
  if (!(top > 0.0)) return cand;
  const double floor_h = p.min_height_frac * top;

  std::size_t i = 1;
  while (i + 1 < x.size()) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < x.size() && x[j + 1] == x[i]) ++j;
      if (j + 1 < x.size() && x[j + 1] < x[i]) {
        const std::size_t mid = (i + j) / 2;
        if (x[mid] >= floor_h)
          cand.push_back({mid, static_cast<double>(mid) / rate, x[mid], PeakLabel::Unlabeled});
      }
      i = j + 1;
    } else {
      ++i;
    }
  }

  const double min_dist = p.min_distance_s * rate;
  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cand[a].height > cand[b].height; });
  std::vector<bool> keep(cand.size(), true);
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t k = order[oi];
    if (!keep[k]) continue;
    for (std::size_t m = 0; m < cand.size(); ++m) {
      if (m == k || !keep[m]) continue;
      const double d = std::abs(static_cast<double>(cand[m].index) - static_cast<double>(cand[k].index));
      if (d < min_dist) keep[m] = false;
    }
  }
  std::vector<PeakEvent> out;
  for (std::size_t k = 0; k < cand.size(); ++k)
    if (keep[k]) out.push_back(cand[k]);
  return out;
}

/// find_envelope_peaks, failing when fewer than three peaks survive.
inline std::vector<PeakEvent> detect_peaks(const Envelope& e, const PeakParams& p = {}) {
  auto peaks = find_envelope_peaks(e, p);
  if (peaks.size() < 3)
    fail(ErrorCode::InsufficientPeaks,
         "detect_peaks: " + std::to_string(peaks.size()) + " peaks survived (need >= 3)");
  return peaks;
}

/// First gap shorter than (or equal to) the second => the first peak is S1.
/// Labels then alternate strictly.
inline std::vector<PeakEvent> label_s1_s2(std::vector<PeakEvent> peaks) {
  if (peaks.size() < 3)
    fail(ErrorCode::InsufficientPeaks, "label_s1_s2: need >= 3 peaks");
  const double g1 = peaks[1].time_s - peaks[0].time_s;
  const double g2 = peaks[2].time_s - peaks[1].time_s;
  // Gaps that differ only by rounding in index / rate count as ties.
  bool s1 = g1 <= g2 + 1e-9;
  for (auto& pk : peaks) {
    pk.label = s1 ? PeakLabel::S1 : PeakLabel::S2;
    s1 = !s1;
  }
  return peaks;
}

struct CycleIntervals {
  double t_sys = 0.0;
  double t_dias = 0.0;
  std::size_t n_cycles = 0;
};

/// Mean S1->S2 gap (systole) and mean S2->next-S1 gap (diastole) over
/// adjacent labeled peaks.
inline CycleIntervals cycle_intervals(const std::vector<PeakEvent>& labeled) {
  double sys = 0.0, dias = 0.0;
  std::size_t n_sys = 0, n_dias = 0;
  for (std::size_t i = 0; i + 1 < labeled.size(); ++i) {
    const auto& a = labeled[i];
    const auto& b = labeled[i + 1];
    if (a.label == PeakLabel::S1 && b.label == PeakLabel::S2) {
      sys += b.time_s - a.time_s;
      ++n_sys;
    } else if (a.label == PeakLabel::S2 && b.label == PeakLabel::S1) {
      dias += b.time_s - a.time_s;
      ++n_dias;
    }
  }
  if (n_sys == 0 || n_dias == 0)
    fail(ErrorCode::InsufficientCycles,
         "cycle_intervals: need at least one S1->S2 and one S2->S1 pair");
  return {sys / static_cast<double>(n_sys), dias / static_cast<double>(n_dias), n_sys};
}

struct RiseDecay {
  double t_rs1 = 0.0, t_ds1 = 0.0, t_rd2 = 0.0, t_dd2 = 0.0;
  double t_s1 = 0.0, t_s2 = 0.0;
  std::size_t used_s1 = 0, used_s2 = 0;
  std::size_t skipped = 0;  ///< peaks whose support was truncated
  std::vector<std::string> warnings;
};

/// For each labeled peak: rise = peak - last sample at or below
/// baseline_frac * height (searching back to the previous peak); decay = first
/// such sample after the peak (searching up to the next peak) - peak.
/// Peaks lacking either crossing are skipped with a warning.
inline RiseDecay rise_decay_times(const Envelope& e, const std::vector<PeakEvent>& labeled,
                                  double baseline_frac = 0.15) {
  const auto& x = e.track.samples;
  const double rate = e.track.rate_hz;
  RiseDecay out;
  double rs1 = 0, ds1 = 0, rd2 = 0, dd2 = 0;
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    const auto& pk = labeled[k];
    if (pk.label == PeakLabel::Unlabeled) continue;
    const double level = baseline_frac * x[pk.index];
    const std::size_t lo = k > 0 ? labeled[k - 1].index : 0;
    const std::size_t hi = k + 1 < labeled.size() ? labeled[k + 1].index : x.size() - 1;

    std::ptrdiff_t before = -1;
    for (std::size_t i = pk.index; i-- > lo;) {
      if (x[i] <= level) {
        before = static_cast<std::ptrdiff_t>(i);
        break;
      }
    }
    std::ptrdiff_t after = -1;
    for (std::size_t i = pk.index + 1; i <= hi && i < x.size(); ++i) {
      if (x[i] <= level) {
        after = static_cast<std::ptrdiff_t>(i);
        break;
      }
    }
    if (before < 0 || after < 0) {
      ++out.skipped;
      out.warnings.push_back("truncated support around " + std::string(to_string(pk.label)) +
                             " at " + std::to_string(pk.time_s) + " s");
      continue;
    }
    const double rise = static_cast<double>(static_cast<std::ptrdiff_t>(pk.index) - before) / rate;
    const double decay = static_cast<double>(after - static_cast<std::ptrdiff_t>(pk.index)) / rate;
    if (pk.label == PeakLabel::S1) {
      rs1 += rise;
      ds1 += decay;
      ++out.used_s1;
    } else {
      rd2 += rise;
      dd2 += decay;
      ++out.used_s2;
    }
  }
  if (out.used_s1 == 0 || out.used_s2 == 0)
    fail(ErrorCode::InsufficientCycles, "rise_decay_times: no S1 or S2 peak with full support");
  out.t_rs1 = rs1 / static_cast<double>(out.used_s1);
  out.t_ds1 = ds1 / static_cast<double>(out.used_s1);
  out.t_rd2 = rd2 / static_cast<double>(out.used_s2);
  out.t_dd2 = dd2 / static_cast<double>(out.used_s2);
  out.t_s1 = out.t_rs1 + out.t_ds1;
  out.t_s2 = out.t_rd2 + out.t_dd2;
  return out;
}

struct CycleSegmentation {
  std::vector<PeakEvent> peaks;
  double t_sys = 0.0, t_dias = 0.0;
  double t_rs1 = 0.0, t_ds1 = 0.0, t_rd2 = 0.0, t_dd2 = 0.0;
  double t_s1 = 0.0, t_s2 = 0.0;
  std::size_t n_cycles = 0;
  std::vector<std::string> warnings;
};

/// detect -> label -> intervals -> rise/decay on a normalized envelope.
inline CycleSegmentation segment_cycles(const Envelope& e, const PeakParams& p = {},
                                        double baseline_frac = 0.15) {
  CycleSegmentation seg;
  seg.peaks = label_s1_s2(detect_peaks(e, p));
  const auto iv = cycle_intervals(seg.peaks);
  seg.t_sys = iv.t_sys;
  seg.t_dias = iv.t_dias;
  seg.n_cycles = iv.n_cycles;
  auto rd = rise_decay_times(e, seg.peaks, baseline_frac);
  seg.t_rs1 = rd.t_rs1;
  seg.t_ds1 = rd.t_ds1;
  seg.t_rd2 = rd.t_rd2;
  seg.t_dd2 = rd.t_dd2;
  seg.t_s1 = rd.t_s1;
  seg.t_s2 = rd.t_s2;
  seg.warnings = std::move(rd.warnings);
  return seg;
}

}  // namespace phonotrack

#pragma once

// Synthetic PCG/ECG with known timing, used as ground truth in tests and
// to produce fixture datasets on disk.
//
// Random numbers: std::mt19937_64 (fully specified by the standard), uniform
// doubles from the top 53 bits, normals by Box-Muller (cosine branch only).
// Other implementations can reproduce the streams from this description.

#include "phonotrack/bp_model.hpp"
#include "phonotrack/error.hpp"
#include "phonotrack/io.hpp"
#include "phonotrack/signal.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace phonotrack::synth {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
};

/// Rise (or decay) time of a Gaussian half-window from the 15% level to its peak.
inline double gaussian_rise_time(double sigma_s, double level = 0.15) {
  return sigma_s * std::sqrt(2.0 * std::log(1.0 / level));
}

struct SynthSpec {
  double hr_bpm = 75.0;
  double hr_end_bpm = 0.0;  ///< linear drift target at the end; 0 = no drift
  double t_sys_s = 0.3;
  double s1_freq_hz = 60.0;
  double s2_freq_hz = 90.0;
  double s1_sigma_ms = 15.0;        ///< rising half of the S1 window
  double s1_decay_sigma_ms = 0.0;   ///< 0 = symmetric
  double s2_sigma_ms = 12.0;
  double s2_decay_sigma_ms = 0.0;
  double s2_rel_amp = 0.6;
  double jitter_ms = 0.0;
  double snr_db = std::numeric_limits<double>::infinity();  ///< inf = noiseless
  double duration_s = 60.0;
  double rate_hz = 2000.0;
  std::uint64_t seed = 1;
  // ECG companion
  double ecg_rate_hz = 190.0;
  double pr_offset_s = 0.040;  ///< R-peak precedes S1 by this much
  double ecg_wander_amp = 0.1;
  double ecg_snr_db = std::numeric_limits<double>::infinity();

  double s1_decay_ms() const { return s1_decay_sigma_ms > 0 ? s1_decay_sigma_ms : s1_sigma_ms; }
  double s2_decay_ms() const { return s2_decay_sigma_ms > 0 ? s2_decay_sigma_ms : s2_sigma_ms; }

  void check() const {
    const double hr_end = hr_end_bpm > 0 ? hr_end_bpm : hr_bpm;
    for (double hr : {hr_bpm, hr_end})
      if (!(hr >= 20.0 && hr <= 240.0)) fail(ErrorCode::InvalidInput, "synth: hr must be in [20, 240]");
    if (!(t_sys_s > 0.0) || !(t_sys_s < 60.0 / std::max(hr_bpm, hr_end)))
      fail(ErrorCode::InvalidInput, "synth: need 0 < t_sys < cycle length");
    if (!(s2_rel_amp > 0.0 && s2_rel_amp <= 1.0))
      fail(ErrorCode::InvalidInput, "synth: s2_rel_amp must be in (0, 1]");
    if (!(s1_sigma_ms > 0 && s2_sigma_ms > 0 && duration_s > 0 && rate_hz > 0 && ecg_rate_hz > 0))
      fail(ErrorCode::InvalidInput, "synth: widths, duration and rates must be positive");
    if (!(s1_freq_hz > 0 && s1_freq_hz < rate_hz / 2 && s2_freq_hz > 0 && s2_freq_hz < rate_hz / 2))
      fail(ErrorCode::InvalidInput, "synth: burst frequencies must lie below Nyquist");
    if (jitter_ms < 0) fail(ErrorCode::InvalidInput, "synth: jitter must be >= 0");
  }
};

struct GroundTruth {
  std::vector<double> s1_times;
  std::vector<double> s2_times;
  double t_sys = 0.0;   ///< mean S1 -> S2
  double t_dias = 0.0;  ///< mean S2 -> next S1
  double hr = 0.0;      ///< 60 / mean S1 -> S1
  bp::PcgFeatureVector features;
};

struct SynthPcg {
  SampledSignal signal;
  GroundTruth truth;
  double noise_sd = 0.0;
};

/// Adds amp * g(t - centre) * cos(2 pi freq (t - centre)), where g is a
/// Gaussian with sigma_rise before the centre and sigma_decay after it.
inline void add_burst(std::vector<double>& x, double rate, double centre, double amp, double freq,
                      double sigma_rise, double sigma_decay) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor((centre - 6 * sigma_rise) * rate)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil((centre + 6 * sigma_decay) * rate)));
  for (std::ptrdiff_t i = lo; i <= hi; ++i) {
    const double t = static_cast<double>(i) / rate - centre;
    const double sg = t < 0 ? sigma_rise : sigma_decay;
    x[static_cast<std::size_t>(i)] +=
        amp * std::exp(-0.5 * t * t / (sg * sg)) * std::cos(2.0 * std::numbers::pi * freq * t);
  }
}

/// Mean power inside +-window_s of each centre.
inline double window_power(const std::vector<double>& x, double rate,
                           const std::vector<double>& centres, double window_s) {
  std::vector<bool> in(x.size(), false);
  const auto half = static_cast<std::ptrdiff_t>(std::llround(window_s * rate));
  for (double c : centres) {
    const auto k = static_cast<std::ptrdiff_t>(std::llround(c * rate));
    for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, k - half);
         i <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(x.size()) - 1, k + half); ++i)
      in[static_cast<std::size_t>(i)] = true;
  }
  double p = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (in[i]) {
      p += x[i] * x[i];
      ++count;
    }
  return count ? p / static_cast<double>(count) : 0.0;
}

/// Noise SD for a target burst-vs-background SNR, measured over +-50 ms
/// windows around the burst centres.
inline double noise_sd_for(const std::vector<double>& clean, double rate,
                           const std::vector<double>& centres, double snr_db) {
  if (!std::isfinite(snr_db)) return 0.0;
  const double pb = window_power(clean, rate, centres, 0.050);
  return std::sqrt(pb / std::pow(10.0, snr_db / 10.0));
}

/// Gaussian-windowed tone bursts: S1 at each cycle start, S2 t_sys later.
inline SynthPcg generate_pcg(const SynthSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  const double rate = spec.rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * rate));
  SynthPcg out;
  out.signal = SampledSignal{std::vector<double>(n, 0.0), rate, SignalLabel::PCG};
  auto& gt = out.truth;

  const double hr_end = spec.hr_end_bpm > 0 ? spec.hr_end_bpm : spec.hr_bpm;
  const double jit = spec.jitter_ms * 1e-3;
  // Per-cycle event times; NaN marks an event outside the recording.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> cyc_s1, cyc_s2;
  double t = 0.0;
  while (t < spec.duration_s) {
    const double s1 = t + (jit > 0 ? rng.normal(0.0, jit) : 0.0);
    const double s2 = t + spec.t_sys_s + (jit > 0 ? rng.normal(0.0, jit) : 0.0);
    const bool in1 = s1 >= 0.0 && s1 < spec.duration_s;
    const bool in2 = s2 >= 0.0 && s2 < spec.duration_s;
    if (in1) gt.s1_times.push_back(s1);
    if (in2) gt.s2_times.push_back(s2);
    cyc_s1.push_back(in1 ? s1 : nan);
    cyc_s2.push_back(in2 ? s2 : nan);
    const double hr = spec.hr_bpm + (hr_end - spec.hr_bpm) * (t / spec.duration_s);
    t += 60.0 / hr;
  }
  for (double c : gt.s1_times)
    add_burst(out.signal.samples, rate, c, 1.0, spec.s1_freq_hz, spec.s1_sigma_ms * 1e-3,
                      spec.s1_decay_ms() * 1e-3);
  for (double c : gt.s2_times)
    add_burst(out.signal.samples, rate, c, spec.s2_rel_amp, spec.s2_freq_hz,
                      spec.s2_sigma_ms * 1e-3, spec.s2_decay_ms() * 1e-3);

  std::vector<double> centres = gt.s1_times;
  centres.insert(centres.end(), gt.s2_times.begin(), gt.s2_times.end());
  out.noise_sd = noise_sd_for(out.signal.samples, rate, centres, spec.snr_db);
  if (out.noise_sd > 0.0)
    for (double& v : out.signal.samples) v += rng.normal(0.0, out.noise_sd);

  // Timing truth from the realized events, paired within and across cycles.
  double sys = 0, dias = 0, cyc = 0;
  std::size_t ns = 0, nd = 0, nc = 0;
  for (std::size_t k = 0; k < cyc_s1.size(); ++k) {
    const bool last = k + 1 == cyc_s1.size();
    if (!std::isnan(cyc_s1[k]) && !std::isnan(cyc_s2[k])) {
      sys += cyc_s2[k] - cyc_s1[k];
      ++ns;
    }
    if (!last && !std::isnan(cyc_s2[k]) && !std::isnan(cyc_s1[k + 1])) {
      dias += cyc_s1[k + 1] - cyc_s2[k];
      ++nd;
    }
    if (!last && !std::isnan(cyc_s1[k]) && !std::isnan(cyc_s1[k + 1])) {
      cyc += cyc_s1[k + 1] - cyc_s1[k];
      ++nc;
    }
  }
  gt.t_sys = ns ? sys / static_cast<double>(ns) : spec.t_sys_s;
  gt.t_dias = nd ? dias / static_cast<double>(nd) : 60.0 / spec.hr_bpm - spec.t_sys_s;
  gt.hr = nc ? 60.0 / (cyc / static_cast<double>(nc)) : spec.hr_bpm;

  auto& f = gt.features;
  f.t_sys = gt.t_sys;
  f.t_dias = gt.t_dias;
  f.t_rs1 = gaussian_rise_time(spec.s1_sigma_ms * 1e-3);
  f.t_ds1 = gaussian_rise_time(spec.s1_decay_ms() * 1e-3);
  f.t_rd2 = gaussian_rise_time(spec.s2_sigma_ms * 1e-3);
  f.t_dd2 = gaussian_rise_time(spec.s2_decay_ms() * 1e-3);
  f.t_s1 = f.t_rs1 + f.t_ds1;
  f.t_s2 = f.t_rd2 + f.t_dd2;
  f.hr_pcg = gt.hr;
  return out;
}

struct SynthEcg {
  SampledSignal signal;
  std::vector<double> r_times;
};

/// Narrow biphasic QRS-like spikes at S1 - pr_offset, a 0.3 Hz baseline
/// wander and optional white noise (SNR relative to the clean ECG power).
/// Uses its own stream (seed + 1) so PCG output does not depend on it.
inline SynthEcg generate_ecg(const SynthSpec& spec) {
  spec.check();
  const auto pcg = generate_pcg(SynthSpec{spec});  // event times only
  Rng rng(spec.seed + 1);
  const double rate = spec.ecg_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * rate));
  SynthEcg out;
  out.signal = SampledSignal{std::vector<double>(n, 0.0), rate, SignalLabel::ECG};
  for (double s1 : pcg.truth.s1_times) {
    const double r = s1 - spec.pr_offset_s;
    if (r >= 0.0) out.r_times.push_back(r);
  }
  const double sigma = 0.008;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    double v = spec.ecg_wander_amp * std::sin(2.0 * std::numbers::pi * 0.3 * t);
    for (double r : out.r_times) {
      const double d = t - r;
      if (std::abs(d) > 0.1) continue;
      v += std::exp(-0.5 * d * d / (sigma * sigma));
      const double ds = d - 0.025;
      v -= 0.25 * std::exp(-0.5 * ds * ds / (sigma * sigma));
    }
    out.signal.samples[i] = v;
  }
  if (std::isfinite(spec.ecg_snr_db)) {
    double p = 0.0;
    for (double v : out.signal.samples) p += v * v;
    p /= static_cast<double>(n);
    const double sd = std::sqrt(p / std::pow(10.0, spec.ecg_snr_db / 10.0));
    for (double& v : out.signal.samples) v += rng.normal(0.0, sd);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cohorts

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct CohortRanges {
  Range hr_bpm{60.0, 90.0};
  Range t_sys_s{0.26, 0.34};
  Range s1_rise_ms{40.0, 60.0};  ///< 15%-to-peak times; Gaussian sigma = time / 1.948
  Range s1_decay_ms{45.0, 70.0};
  Range s2_rise_ms{30.0, 50.0};
  Range s2_decay_ms{35.0, 60.0};
  Range s2_rel_amp{0.6, 0.85};
};

struct CohortOptions {
  std::size_t n_subjects = 15;
  CohortRanges ranges{};
  double sbp_noise_sd = 0.0;
  double dbp_noise_sd = 0.0;
  double duration_s = 60.0;
  double rate_hz = 2000.0;
  double snr_db = 25.0;
  double jitter_ms = 5.0;
  std::uint64_t seed = 2024;
};

struct CohortSubject {
  std::string subject_id;
  SynthSpec spec;
  bp::PcgFeatureVector features;  ///< true features
  double sbp = 0.0;
  double dbp = 0.0;
};

/// Coefficients producing resting-range pressures on synthetic features.
/// The t_s1/t_s2 linear terms are zero because they are not identifiable.
inline bp::BpCoefficients synthetic_reference_coefficients() {
  bp::BpCoefficients c;
  c.sbp = {80.0, 40.0, 300.0, 200.0, 0.0, 0.3, 1e-3, 20.0, 100.0, -2000.0};
  c.dbp = {50.0, 10.0, 200.0, 150.0, 0.0, 0.2, 8e-4, 5.0, 80.0, -1500.0};
  c.units = bp::UnitConvention::Seconds;
  c.id = "synthetic_reference";
  return c;
}

/// Samples per-subject specs uniformly from the ranges; targets are the model
/// evaluated on the true features plus Gaussian noise.
inline std::vector<CohortSubject> generate_cohort(
    const CohortOptions& opt, const bp::BpCoefficients& truth = synthetic_reference_coefficients()) {
  Rng rng(opt.seed);
  // Separate stream so enabling target noise leaves the recordings unchanged.
  Rng noise(opt.seed + 0x9E3779B97F4A7C15ULL);
  std::vector<CohortSubject> out;
  for (std::size_t i = 0; i < opt.n_subjects; ++i) {
    CohortSubject s;
    char id[32];
    std::snprintf(id, sizeof id, "subject_%02zu", i + 1);
    s.subject_id = id;
    auto& sp = s.spec;
    const auto& r = opt.ranges;
    sp.hr_bpm = rng.uniform(r.hr_bpm.lo, r.hr_bpm.hi);
    sp.t_sys_s = rng.uniform(r.t_sys_s.lo, r.t_sys_s.hi);
    sp.s1_sigma_ms = rng.uniform(r.s1_rise_ms.lo, r.s1_rise_ms.hi) / std::sqrt(2.0 * std::log(1.0 / 0.15));
    sp.s1_decay_sigma_ms = rng.uniform(r.s1_decay_ms.lo, r.s1_decay_ms.hi) / std::sqrt(2.0 * std::log(1.0 / 0.15));
    sp.s2_sigma_ms = rng.uniform(r.s2_rise_ms.lo, r.s2_rise_ms.hi) / std::sqrt(2.0 * std::log(1.0 / 0.15));
    sp.s2_decay_sigma_ms = rng.uniform(r.s2_decay_ms.lo, r.s2_decay_ms.hi) / std::sqrt(2.0 * std::log(1.0 / 0.15));
    sp.s2_rel_amp = rng.uniform(r.s2_rel_amp.lo, r.s2_rel_amp.hi);
    sp.duration_s = opt.duration_s;
    sp.rate_hz = opt.rate_hz;
    sp.snr_db = opt.snr_db;
    sp.ecg_snr_db = 30.0;
    sp.jitter_ms = opt.jitter_ms;
    sp.seed = opt.seed * 1000 + i + 1;
    sp.check();

    // True features from the spec itself (not a realization).
    auto& f = s.features;
    f.t_sys = sp.t_sys_s;
    f.t_dias = 60.0 / sp.hr_bpm - sp.t_sys_s;
    f.t_rs1 = gaussian_rise_time(sp.s1_sigma_ms * 1e-3);
    f.t_ds1 = gaussian_rise_time(sp.s1_decay_ms() * 1e-3);
    f.t_rd2 = gaussian_rise_time(sp.s2_sigma_ms * 1e-3);
    f.t_dd2 = gaussian_rise_time(sp.s2_decay_ms() * 1e-3);
    f.t_s1 = f.t_rs1 + f.t_ds1;
    f.t_s2 = f.t_rd2 + f.t_dd2;
    f.hr_pcg = sp.hr_bpm;
    s.sbp = bp::predict_sbp(f, truth) + (opt.sbp_noise_sd > 0 ? noise.normal(0.0, opt.sbp_noise_sd) : 0.0);
    s.dbp = bp::predict_dbp(f, truth) + (opt.dbp_noise_sd > 0 ? noise.normal(0.0, opt.dbp_noise_sd) : 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<bp::BpSample> to_bp_samples(const std::vector<CohortSubject>& cohort) {
  std::vector<bp::BpSample> out;
  for (const auto& s : cohort) out.push_back({s.features, s.sbp, s.dbp, s.subject_id});
  return out;
}

/// Writes <out>/<subject_id>/{pcg.wav, ecg.txt, meta.json}. The PCG is
/// scaled to a 0.9 peak before 16-bit quantization.
inline void write_cohort(const std::filesystem::path& out_dir, const std::vector<CohortSubject>& cohort) {
  std::filesystem::create_directories(out_dir);
  for (const auto& s : cohort) {
    const auto dir = out_dir / s.subject_id;
    std::filesystem::create_directories(dir);
    auto pcg = generate_pcg(s.spec);
    const double peak = max_abs(pcg.signal.samples);
    if (peak > 0.0)
      for (double& v : pcg.signal.samples) v *= 0.9 / peak;
    io::write_wav_pcm16(dir / "pcg.wav", pcg.signal);
    const auto ecg = generate_ecg(s.spec);
    io::write_ecg_text(dir / "ecg.txt", ecg.signal);
    nlohmann::json meta;
    meta["subject_id"] = s.subject_id;
    meta["sbp"] = s.sbp;
    meta["dbp"] = s.dbp;
    meta["ecg_rate_hz"] = s.spec.ecg_rate_hz;
    meta["synthetic"] = true;
    meta["truth"] = {{"hr_bpm", s.spec.hr_bpm},      {"t_sys", s.features.t_sys},
                     {"t_dias", s.features.t_dias},  {"t_rs1", s.features.t_rs1},
                     {"t_ds1", s.features.t_ds1},    {"t_rd2", s.features.t_rd2},
                     {"t_dd2", s.features.t_dd2},    {"seed", s.spec.seed},
                     {"snr_db", s.spec.snr_db}};
    io::write_json(dir / "meta.json", meta);
  }
}

}  // namespace phonotrack::synth

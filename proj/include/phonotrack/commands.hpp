#pragma once

// Dataset-level commands behind the phonotrack CLI. Each returns its report
// and writes it (plus CSV series and SVG plots) under cfg.out_dir.
// Reports carry the config and version but no timestamps or paths, so two
// runs with the same inputs produce identical files.

#include "phonotrack/bp_model.hpp"
#include "phonotrack/config.hpp"
#include "phonotrack/envelopes.hpp"
#include "phonotrack/error.hpp"
#include "phonotrack/evaluation.hpp"
#include "phonotrack/hr.hpp"
#include "phonotrack/io.hpp"
#include "phonotrack/plot.hpp"
#include "phonotrack/quality.hpp"
#include "phonotrack/signal.hpp"
#include "phonotrack/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace phonotrack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommandResult {
  json report;
  std::size_t subject_errors = 0;
  int exit_code() const { return subject_errors == 0 ? 0 : 1; }
};

inline json error_json(const std::string& subject, const Error& e) {
  json j{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (!subject.empty()) j["subject_id"] = subject;
  if (!e.stage().empty()) j["stage"] = e.stage();
  return j;
}

inline json report_header(const std::string& schema, const RunConfig& cfg) {
  return {{"schema", schema}, {"version", std::string(kVersion)}, {"config", cfg.to_json()}};
}

/// Optional value as JSON (null when absent or non-finite).
inline json opt_num(std::optional<double> v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

inline json metrics_json(const eval::ErrorMetrics& m) {
  return {{"mae", m.mae}, {"rmse", m.rmse}, {"bias_mean", m.bias_mean}, {"bias_sd", m.bias_sd}, {"n", m.n}};
}

inline json agreement_json(const eval::AgreementReport& r) {
  return {{"pearson_r", opt_num(r.pearson_r)},
          {"mae", r.mae},
          {"rmse", r.rmse},
          {"bias_mean", r.bias_mean},
          {"bias_sd", r.bias_sd},
          {"loa_low", r.loa_low},
          {"loa_high", r.loa_high},
          {"within_loa_fraction", r.within_loa_fraction},
          {"n", r.n}};
}

// ---------------------------------------------------------------------------
// Dataset loading

struct Dataset {
  std::vector<io::SubjectRecord> subjects;
  json errors = json::array();
};

inline SampledSignal working_pcg(const SampledSignal& pcg, const RunConfig& cfg) {
  if (cfg.working_rate_hz <= 0.0 || std::abs(pcg.rate_hz - cfg.working_rate_hz) < 1e-9) return pcg;
  return resample_rational(pcg, cfg.working_rate_hz);
}

/// Loads every subject folder; failures are collected, not thrown.
inline Dataset load_dataset(const fs::path& dir, const RunConfig& cfg) {
  Dataset ds;
  const auto dirs = io::list_subject_dirs(dir);
  if (dirs.empty()) fail(ErrorCode::FileNotFound, "no subject folders with pcg.wav under " + dir.string());
  for (const auto& d : dirs) {
    try {
      auto rec = io::load_subject(d);
      rec.pcg = working_pcg(rec.pcg, cfg);
      ds.subjects.push_back(std::move(rec));
    } catch (const Error& e) {
      ds.errors.push_back(error_json(d.filename().string(), e.with_stage("load")));
    }
  }
  return ds;
}

inline void write_errors(const fs::path& out, const std::string& name, const json& errors) {
  if (!errors.empty()) io::write_json(out / name, errors);
}

inline void write_agreement_plots(const fs::path& out, const std::string& stem, const std::string& what,
                                  const eval::BlandAltman& ba, std::span<const double> pred,
                                  std::span<const double> ref) {
  plot::Figure corr;
  corr.title = what + ": estimate vs reference";
  corr.x_label = "reference";
  corr.y_label = "estimate";
  corr.x.assign(ref.begin(), ref.end());
  corr.y.assign(pred.begin(), pred.end());
  corr.identity = true;
  io::write_text(out / (stem + "_correlation.svg"), plot::render_svg(corr));

  plot::Figure bl;
  bl.title = what + ": Bland-Altman";
  bl.x_label = "mean of estimate and reference";
  bl.y_label = "estimate - reference";
  bl.x = ba.means;
  bl.y = ba.diffs;
  bl.hlines = {{ba.report.bias_mean, "bias", false},
               {ba.report.loa_low, "-1.96 SD", true},
               {ba.report.loa_high, "+1.96 SD", true}};
  io::write_text(out / (stem + "_bland_altman.svg"), plot::render_svg(bl));
}

// ---------------------------------------------------------------------------
// synth

struct SynthCommandSpec {
  synth::CohortOptions options;
  bp::BpCoefficients coefficients = synth::synthetic_reference_coefficients();
};

/// JSON keys: n_subjects, seed, duration_s, rate_hz, snr_db (null = noiseless),
/// jitter_ms, sbp_noise_sd, dbp_noise_sd, ranges.{hr_bpm, t_sys_s, s1_rise_ms,
/// s1_decay_ms, s2_rise_ms, s2_decay_ms, s2_rel_amp} as [lo, hi], and
/// coefficients ("synthetic", "table1" or an inline coefficient object).
inline SynthCommandSpec parse_synth_spec(const json& j) {
  SynthCommandSpec s;
  auto& o = s.options;
  try {
    o.n_subjects = j.value("n_subjects", o.n_subjects);
    o.seed = j.value("seed", o.seed);
    o.duration_s = j.value("duration_s", o.duration_s);
    o.rate_hz = j.value("rate_hz", o.rate_hz);
    if (j.contains("snr_db"))
      o.snr_db = j["snr_db"].is_null() ? std::numeric_limits<double>::infinity() : j["snr_db"].get<double>();
    o.jitter_ms = j.value("jitter_ms", o.jitter_ms);
    o.sbp_noise_sd = j.value("sbp_noise_sd", o.sbp_noise_sd);
    o.dbp_noise_sd = j.value("dbp_noise_sd", o.dbp_noise_sd);
    if (j.contains("ranges")) {
      const auto& r = j["ranges"];
      auto range = [&](const char* key, synth::Range& dst) {
        if (!r.contains(key)) return;
        const auto v = r[key].get<std::vector<double>>();
        if (v.size() != 2 || !(v[0] <= v[1]))
          fail(ErrorCode::ConfigError, std::string("synth spec: range '") + key + "' must be [lo, hi]");
        dst = {v[0], v[1]};
      };
      range("hr_bpm", o.ranges.hr_bpm);
      range("t_sys_s", o.ranges.t_sys_s);
      range("s1_rise_ms", o.ranges.s1_rise_ms);
      range("s1_decay_ms", o.ranges.s1_decay_ms);
      range("s2_rise_ms", o.ranges.s2_rise_ms);
      range("s2_decay_ms", o.ranges.s2_decay_ms);
      range("s2_rel_amp", o.ranges.s2_rel_amp);
    }
    if (j.contains("coefficients")) {
      const auto& c = j["coefficients"];
      if (c.is_string() && c.get<std::string>() == "table1") s.coefficients = bp::table1_coefficients();
      else if (c.is_string() && c.get<std::string>() == "synthetic") s.coefficients = synth::synthetic_reference_coefficients();
      else if (c.is_object()) s.coefficients = bp::coefficients_from_json(c);
      else fail(ErrorCode::ConfigError, "synth spec: coefficients must be 'synthetic', 'table1' or an object");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("synth spec: ") + e.what());
  }
  if (o.n_subjects == 0) fail(ErrorCode::ConfigError, "synth spec: n_subjects must be positive");
  return s;
}

inline CommandResult cmd_synth(const SynthCommandSpec& spec, const fs::path& out_dir) {
  const auto cohort = synth::generate_cohort(spec.options, spec.coefficients);
  synth::write_cohort(out_dir, cohort);
  const auto& o = spec.options;
  json subjects = json::array();
  for (const auto& s : cohort)
    subjects.push_back({{"subject_id", s.subject_id},
                        {"seed", s.spec.seed},
                        {"hr_bpm", s.spec.hr_bpm},
                        {"t_sys_s", s.spec.t_sys_s},
                        {"sbp", s.sbp},
                        {"dbp", s.dbp}});
  CommandResult r;
  r.report = {{"schema", "phonotrack.synth/1"},
              {"version", std::string(kVersion)},
              {"spec",
               {{"n_subjects", o.n_subjects},
                {"seed", o.seed},
                {"duration_s", o.duration_s},
                {"rate_hz", o.rate_hz},
                {"snr_db", opt_num(o.snr_db)},
                {"jitter_ms", o.jitter_ms},
                {"sbp_noise_sd", o.sbp_noise_sd},
                {"dbp_noise_sd", o.dbp_noise_sd}}},
              {"coefficients", bp::to_json(spec.coefficients)},
              {"subjects", subjects}};
  io::write_json(out_dir / "cohort.json", r.report);
  return r;
}

// ---------------------------------------------------------------------------
// hr

inline CommandResult cmd_hr(const fs::path& dataset_dir, const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  const auto ds = load_dataset(dataset_dir, cfg);
  const auto methods = cfg.methods();
  const auto formula = parse_formula(cfg.formula);
  const auto params = cfg.pipeline();
  const FramePlan plan{cfg.frame_len_s, cfg.frame_len_s};

  CommandResult res;
  json errors = ds.errors;
  json subjects = json::array();
  std::vector<std::vector<std::string>> frame_rows;
  std::map<std::string, std::map<std::string, eval::PairedSeries>> vs_ecg, vs_truth;

  for (const auto& rec : ds.subjects) {
    json sj{{"subject_id", rec.subject_id}};
    const auto frames = segment_frames(rec.pcg, plan);
    sj["frames"] = frames.size();

    std::vector<std::optional<double>> ecg_bpm(frames.size());
    if (rec.ecg) {
      const auto ecg_frames = segment_frames(*rec.ecg, plan);
      json ej = json::array();
      for (std::size_t i = 0; i < frames.size(); ++i) {
        if (i < ecg_frames.size()) {
          try {
            const auto e = hr_from_ecg_frame(ecg_frames[i].signal, cfg.ecg_prominence, i);
            if (e.accepted()) ecg_bpm[i] = e.bpm;
          } catch (const Error&) {
          }
        }
        ej.push_back(opt_num(ecg_bpm[i]));
      }
      sj["ecg_bpm"] = ej;
    }
    std::optional<double> truth_hr;
    if (rec.meta.contains("truth") && rec.meta["truth"].contains("hr_bpm"))
      truth_hr = rec.meta["truth"]["hr_bpm"].get<double>();

    std::vector<double> pcg_s1_times;
    json mj = json::object();
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const auto method = methods[mi];
      const std::string key = method_key(method);
      json fj = json::array();
      std::vector<double> accepted;
      eval::PairedSeries ecg_pairs, truth_pairs;
      for (const auto& f : frames) {
        json row{{"frame", f.index}, {"start_s", f.start_s}};
        std::vector<std::string> csv{rec.subject_id, key, std::to_string(f.index), io::num(f.start_s)};
        try {
          const auto r = hr_pipeline(f.signal, method, formula, params, f.index);
          row["bpm"] = r.hr.bpm;
          row["t_sys"] = r.segmentation.t_sys;
          row["t_dias"] = r.segmentation.t_dias;
          row["cycles"] = r.segmentation.n_cycles;
          row["accepted"] = r.hr.accepted();
          csv.push_back(io::num(r.hr.bpm));
          if (r.hr.accepted()) {
            accepted.push_back(r.hr.bpm);
            if (ecg_bpm[f.index]) {
              ecg_pairs.pred.push_back(r.hr.bpm);
              ecg_pairs.ref.push_back(*ecg_bpm[f.index]);
            }
            if (truth_hr) {
              truth_pairs.pred.push_back(r.hr.bpm);
              truth_pairs.ref.push_back(*truth_hr);
            }
          }
          if (mi == 0)
            for (const auto& p : r.segmentation.peaks)
              if (p.label == PeakLabel::S1) pcg_s1_times.push_back(f.start_s + p.time_s);
          csv.push_back(r.hr.accepted() ? "ok" : "out_of_range");
        } catch (const Error& e) {
          row["error"] = error_json("", e);
          csv.push_back("");
          csv.push_back(std::string(to_string(e.code())));
        }
        csv.push_back(ecg_bpm[f.index] ? io::num(*ecg_bpm[f.index]) : "");
        frame_rows.push_back(std::move(csv));
        fj.push_back(std::move(row));
      }
      json m{{"frames", fj}, {"valid_frames", accepted.size()}};
      if (accepted.empty()) {
        errors.push_back(error_json(rec.subject_id, Error(ErrorCode::NoValidFrames,
                                                          key + ": no frame produced an accepted HR", "hr")));
        ++res.subject_errors;
      } else {
        double s = 0.0;
        for (double v : accepted) s += v;
        m["mean_bpm"] = s / static_cast<double>(accepted.size());
      }
      if (ecg_pairs.pred.size() >= 2) m["vs_ecg"] = metrics_json(eval::error_metrics(ecg_pairs.pred, ecg_pairs.ref));
      if (!ecg_pairs.pred.empty()) vs_ecg[key][rec.subject_id] = ecg_pairs;
      if (!truth_pairs.pred.empty()) vs_truth[key][rec.subject_id] = truth_pairs;
      mj[key] = std::move(m);
    }
    sj["methods"] = std::move(mj);

    if (rec.ecg) {
      try {
        const auto al = io::align_streams(ecg_rpeak_times(*rec.ecg, cfg.ecg_prominence), pcg_s1_times,
                                          cfg.align_max_lag_s);
        sj["alignment"] = {{"lag_s", al.lag_s}, {"score", al.score}, {"matched", al.matched},
                           {"low_confidence", al.low_confidence}};
      } catch (const Error& e) {
        sj["alignment"] = {{"error", error_json("", e)}};
      }
    }
    subjects.push_back(std::move(sj));
  }
  res.subject_errors += ds.errors.size();

  json cohort = json::object();
  for (const auto method : methods) {
    const std::string key = method_key(method);
    json c = json::object();
    if (auto it = vs_ecg.find(key); it != vs_ecg.end()) {
      c["vs_ecg_subject_mean"] = metrics_json(eval::subject_aggregate(it->second));
      std::vector<double> pred, ref;
      std::vector<std::vector<std::string>> rows;
      for (const auto& [sid, ps] : it->second)
        for (std::size_t i = 0; i < ps.pred.size(); ++i) {
          pred.push_back(ps.pred[i]);
          ref.push_back(ps.ref[i]);
          rows.push_back({sid, io::num(ps.pred[i]), io::num(ps.ref[i]), io::num(0.5 * (ps.pred[i] + ps.ref[i])),
                          io::num(ps.pred[i] - ps.ref[i])});
        }
      io::write_csv(out / ("hr_" + key + "_pairs.csv"), {"subject_id", "hr_pcg", "hr_ecg", "mean", "diff"}, rows);
      if (pred.size() >= 3) {
        const auto ba = eval::bland_altman(pred, ref);
        c["vs_ecg_pooled"] = agreement_json(ba.report);
        write_agreement_plots(out, "hr_" + key, "HR " + key, ba, pred, ref);
      }
    }
    if (auto it = vs_truth.find(key); it != vs_truth.end())
      c["vs_truth_subject_mean"] = metrics_json(eval::subject_aggregate(it->second));
    cohort[key] = std::move(c);
  }

  io::write_csv(out / "hr_frames.csv", {"subject_id", "method", "frame", "start_s", "hr_pcg", "status", "hr_ecg"},
                frame_rows);
  res.report = report_header("phonotrack.hr/1", cfg);
  res.report["formula"] = std::string(to_string(formula));
  res.report["subjects"] = std::move(subjects);
  res.report["cohort"] = std::move(cohort);
  res.report["errors"] = errors;
  io::write_json(out / "hr_report.json", res.report);
  write_errors(out, "hr_errors.json", errors);
  return res;
}

// ---------------------------------------------------------------------------
// quality

inline CommandResult cmd_quality(const fs::path& dataset_dir, const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  const auto ds = load_dataset(dataset_dir, cfg);
  const auto params = cfg.pipeline();
  const auto seg_method = parse_method(cfg.feature_method);
  const FramePlan plan{cfg.frame_len_s, cfg.frame_len_s};
  const std::vector<std::pair<std::string, wavelets::WaveletKind>> kinds = {
      {"morlet", wavelets::WaveletKind::morlet()},
      {"morse", wavelets::WaveletKind::morse()},
      {"bump", wavelets::WaveletKind::bump()}};

  CommandResult res;
  json errors = ds.errors;
  res.subject_errors = ds.errors.size();
  json rows = json::array();
  std::vector<std::vector<std::string>> table;
  std::vector<double> nrmse_all[3];
  std::size_t ordered = 0, with_nrmse = 0;

  for (const auto& rec : ds.subjects) {
    json row{{"subject_id", rec.subject_id}};
    try {
      const auto band = detail::run_stage("band", [&] { return quality::fft_band(rec.pcg, cfg.band_threshold); });
      row["band_hz"] = {{"low", band.low_hz}, {"high", band.high_hz}};
      const auto frames = segment_frames(rec.pcg, plan);
      double sums[3] = {0, 0, 0};
      std::size_t nrmse_frames = 0;
      std::vector<double> snrs;
      std::size_t saturated = 0;
      for (const auto& f : frames) {
        try {
          double v[3];
          for (std::size_t k = 0; k < kinds.size(); ++k) v[k] = quality::frame_nrmse(f.signal, kinds[k].second);
          for (std::size_t k = 0; k < 3; ++k) sums[k] += v[k];
          ++nrmse_frames;
        } catch (const Error&) {
        }
        try {
          const auto r = hr_pipeline(f.signal, seg_method, HrFormula::CyclePeriod, params, f.index);
          const auto snr = quality::snr_frame(f.signal, r.segmentation.peaks, cfg.snr_window_ms);
          snrs.push_back(snr.snr_db);
          if (snr.saturated) ++saturated;
        } catch (const Error&) {
        }
      }
      if (nrmse_frames == 0 && snrs.empty())
        fail(ErrorCode::NoValidFrames, "no frame yielded NRMSE or SNR");
      json nj = json::object();
      double means[3] = {0, 0, 0};
      for (std::size_t k = 0; k < 3; ++k) {
        if (nrmse_frames) {
          means[k] = sums[k] / static_cast<double>(nrmse_frames);
          nrmse_all[k].push_back(means[k]);
        }
        nj[kinds[k].first] = nrmse_frames ? json(means[k]) : json(nullptr);
      }
      if (nrmse_frames) {
        ++with_nrmse;
        if (means[0] <= means[1] && means[1] <= means[2]) ++ordered;
      }
      row["nrmse"] = nj;
      json sj = json::object();
      if (!snrs.empty()) {
        double s = 0.0;
        for (double v : snrs) s += v;
        sj = {{"max", *std::max_element(snrs.begin(), snrs.end())},
              {"min", *std::min_element(snrs.begin(), snrs.end())},
              {"avg", s / static_cast<double>(snrs.size())},
              {"saturated_frames", saturated}};
      }
      row["snr_db"] = sj;
      row["frames_total"] = frames.size();
      row["frames_nrmse"] = nrmse_frames;
      row["frames_snr"] = snrs.size();
      table.push_back({rec.subject_id, io::num(band.low_hz), io::num(band.high_hz),
                       nrmse_frames ? io::num(means[0]) : "", nrmse_frames ? io::num(means[1]) : "",
                       nrmse_frames ? io::num(means[2]) : "", snrs.empty() ? "" : io::num(sj["max"].get<double>()),
                       snrs.empty() ? "" : io::num(sj["min"].get<double>()),
                       snrs.empty() ? "" : io::num(sj["avg"].get<double>())});

      if (cfg.export_tf && !frames.empty()) {
        const auto sg = quality::spectrogram_stft(frames.front().signal);
        std::vector<std::string> header{"time_s"};
        for (double fz : sg.freqs_hz) header.push_back("f" + io::num(fz));
        std::vector<std::vector<std::string>> srows;
        for (std::size_t c = 0; c < sg.magnitude.size(); ++c) {
          std::vector<std::string> r{io::num(sg.times_s[c])};
          for (double m : sg.magnitude[c]) r.push_back(io::num(m));
          srows.push_back(std::move(r));
        }
        io::write_csv(out / "quality" / (rec.subject_id + "_spectrogram.csv"), header, srows);
        const auto mf = quality::mfcc(frames.front().signal);
        std::vector<std::string> mh{"time_s"};
        for (std::size_t q = 0; q < 13; ++q) mh.push_back("c" + std::to_string(q));
        std::vector<std::vector<std::string>> mrows;
        for (std::size_t c = 0; c < mf.size(); ++c) {
          std::vector<std::string> r{io::num(sg.times_s[c])};
          for (double v : mf[c]) r.push_back(io::num(v));
          mrows.push_back(std::move(r));
        }
        io::write_csv(out / "quality" / (rec.subject_id + "_mfcc.csv"), mh, mrows);
      }
    } catch (const Error& e) {
      errors.push_back(error_json(rec.subject_id, e));
      ++res.subject_errors;
      continue;
    }
    rows.push_back(std::move(row));
  }

  json summary = json::object();
  for (std::size_t k = 0; k < 3; ++k) {
    if (nrmse_all[k].empty()) continue;
    auto v = nrmse_all[k];
    std::sort(v.begin(), v.end());
    summary["nrmse_median"][kinds[k].first] = eval::quantile_sorted(v, 0.5);
  }
  summary["ordered_fraction"] = with_nrmse ? json(static_cast<double>(ordered) / static_cast<double>(with_nrmse))
                                           : json(nullptr);

  io::write_csv(out / "quality_table.csv",
                {"subject_id", "band_low_hz", "band_high_hz", "nrmse_morlet", "nrmse_morse", "nrmse_bump",
                 "snr_max_db", "snr_min_db", "snr_avg_db"},
                table);
  res.report = report_header("phonotrack.quality/1", cfg);
  res.report["subjects"] = std::move(rows);
  res.report["summary"] = std::move(summary);
  res.report["errors"] = errors;
  io::write_json(out / "quality_report.json", res.report);
  write_errors(out, "quality_errors.json", errors);
  return res;
}

// ---------------------------------------------------------------------------
// bp

struct SubjectBpInput {
  std::string subject_id;
  bp::SubjectFeatures features;
  std::optional<double> sbp_ref;
  std::optional<double> dbp_ref;
};

/// Runs the segmentation pipeline on every frame and averages the features.
inline std::vector<SubjectBpInput> extract_features(const Dataset& ds, const RunConfig& cfg, json& errors,
                                                    std::size_t& subject_errors) {
  const auto method = parse_method(cfg.feature_method);
  const auto formula = parse_formula(cfg.formula);
  const auto params = cfg.pipeline();
  std::vector<SubjectBpInput> out;
  for (const auto& rec : ds.subjects) {
    std::vector<bp::FrameFeatures> ff;
    for (const auto& f : segment_frames(rec.pcg, {cfg.frame_len_s, cfg.frame_len_s})) {
      bp::FrameFeatures x;
      try {
        const auto r = hr_pipeline(f.signal, method, formula, params, f.index);
        x.segmentation = r.segmentation;
        x.hr = r.hr;
      } catch (const Error&) {
      }
      ff.push_back(std::move(x));
    }
    try {
      out.push_back({rec.subject_id, bp::extract_subject_features(ff), rec.sbp_ref, rec.dbp_ref});
    } catch (const Error& e) {
      errors.push_back(error_json(rec.subject_id, e.with_stage("features")));
      ++subject_errors;
    }
  }
  return out;
}

inline json features_json(const bp::PcgFeatureVector& f) {
  return {{"t_sys", f.t_sys}, {"t_dias", f.t_dias}, {"t_rs1", f.t_rs1}, {"t_ds1", f.t_ds1},
          {"t_rd2", f.t_rd2}, {"t_dd2", f.t_dd2},   {"t_s1", f.t_s1},   {"t_s2", f.t_s2},
          {"hr_pcg", f.hr_pcg}};
}

inline std::vector<bp::BpSample> with_references(const std::vector<SubjectBpInput>& in, json& errors,
                                                 std::size_t& subject_errors) {
  std::vector<bp::BpSample> out;
  for (const auto& s : in) {
    if (!s.sbp_ref || !s.dbp_ref) {
      errors.push_back(error_json(s.subject_id, Error(ErrorCode::InsufficientData, "no reference BP in meta.json", "bp")));
      ++subject_errors;
      continue;
    }
    out.push_back({s.features.features, *s.sbp_ref, *s.dbp_ref, s.subject_id});
  }
  return out;
}

inline void write_feature_csv(const fs::path& path, const std::vector<SubjectBpInput>& in) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : in) {
    const auto& f = s.features.features;
    rows.push_back({s.subject_id, io::num(f.t_sys), io::num(f.t_dias), io::num(f.t_rs1), io::num(f.t_ds1),
                    io::num(f.t_rd2), io::num(f.t_dd2), io::num(f.t_s1), io::num(f.t_s2), io::num(f.hr_pcg),
                    std::to_string(s.features.valid_frames)});
  }
  io::write_csv(path, {"subject_id", "t_sys", "t_dias", "t_rs1", "t_ds1", "t_rd2", "t_dd2", "t_s1", "t_s2",
                       "hr_pcg", "valid_frames"},
                rows);
}

/// "table1", "synthetic" or a path to a coefficient JSON file.
inline bp::BpCoefficients load_coefficients(const std::string& source) {
  if (source == "table1") return bp::table1_coefficients();
  if (source == "synthetic") return synth::synthetic_reference_coefficients();
  std::ifstream in(source);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open coefficient file " + source);
  try {
    return bp::coefficients_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
}

inline json side_agreement(const fs::path& out, const std::string& stem, const std::string& what,
                           const std::vector<double>& pred, const std::vector<double>& ref) {
  if (pred.size() < 3) return nullptr;
  const auto ba = eval::bland_altman(pred, ref);
  write_agreement_plots(out, stem, what, ba, pred, ref);
  return agreement_json(ba.report);
}

inline CommandResult cmd_bp_fit(const fs::path& dataset_dir, const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  const auto ds = load_dataset(dataset_dir, cfg);
  CommandResult res;
  json errors = ds.errors;
  res.subject_errors = ds.errors.size();
  const auto inputs = extract_features(ds, cfg, errors, res.subject_errors);
  const auto samples = with_references(inputs, errors, res.subject_errors);
  write_feature_csv(out / "bp_features.csv", inputs);
  res.report = report_header("phonotrack.bp_fit/1", cfg);
  try {
    const auto fit = bp::fit_bp_model(samples, {bp::parse_units(cfg.units), 0.0});
    res.report["coefficients"] = bp::to_json(fit.coefficients);
    res.report["fit"] = {{"subjects", samples.size()},
                         {"sbp_residual_rms", fit.sbp_residual_rms},
                         {"dbp_residual_rms", fit.dbp_residual_rms},
                         {"sbp_condition", fit.sbp_condition},
                         {"dbp_condition", fit.dbp_condition}};
    io::write_json(out / "bp_coefficients.json", bp::to_json(fit.coefficients));
  } catch (const Error& e) {
    errors.push_back(error_json("", e.with_stage("fit")));
    ++res.subject_errors;
  }
  res.report["errors"] = errors;
  io::write_json(out / "bp_fit_report.json", res.report);
  write_errors(out, "bp_errors.json", errors);
  return res;
}

inline CommandResult cmd_bp_predict(const fs::path& dataset_dir, const RunConfig& cfg,
                                    const std::string& coefficients) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  const auto coef = load_coefficients(coefficients);
  const auto ds = load_dataset(dataset_dir, cfg);
  CommandResult res;
  json errors = ds.errors;
  res.subject_errors = ds.errors.size();
  const auto inputs = extract_features(ds, cfg, errors, res.subject_errors);
  write_feature_csv(out / "bp_features.csv", inputs);
  json preds = json::array();
  std::vector<double> sp, sr, dp, dr;
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : inputs) {
    const auto p = bp::predict(s.features.features, coef);
    preds.push_back({{"subject_id", s.subject_id}, {"sbp", p.sbp}, {"dbp", p.dbp},
                     {"implausible", p.implausible}, {"sbp_ref", opt_num(s.sbp_ref)},
                     {"dbp_ref", opt_num(s.dbp_ref)}, {"features", features_json(s.features.features)}});
    rows.push_back({s.subject_id, io::num(p.sbp), io::num(p.dbp), s.sbp_ref ? io::num(*s.sbp_ref) : "",
                    s.dbp_ref ? io::num(*s.dbp_ref) : ""});
    if (s.sbp_ref && s.dbp_ref) {
      sp.push_back(p.sbp);
      sr.push_back(*s.sbp_ref);
      dp.push_back(p.dbp);
      dr.push_back(*s.dbp_ref);
    }
  }
  io::write_csv(out / "bp_predictions.csv", {"subject_id", "sbp", "dbp", "sbp_ref", "dbp_ref"}, rows);
  res.report = report_header("phonotrack.bp_predict/1", cfg);
  res.report["coefficients"] = bp::to_json(coef);
  res.report["predictions"] = preds;
  res.report["agreement"] = {{"sbp", side_agreement(out, "bp_predict_sbp", "SBP", sp, sr)},
                             {"dbp", side_agreement(out, "bp_predict_dbp", "DBP", dp, dr)}};
  res.report["errors"] = errors;
  io::write_json(out / "bp_predict_report.json", res.report);
  write_errors(out, "bp_errors.json", errors);
  return res;
}

inline CommandResult cmd_bp_loocv(const fs::path& dataset_dir, const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = cfg.out_dir;
  const auto ds = load_dataset(dataset_dir, cfg);
  CommandResult res;
  json errors = ds.errors;
  res.subject_errors = ds.errors.size();
  const auto inputs = extract_features(ds, cfg, errors, res.subject_errors);
  const auto samples = with_references(inputs, errors, res.subject_errors);
  write_feature_csv(out / "bp_features.csv", inputs);
  res.report = report_header("phonotrack.bp_loocv/1", cfg);
  try {
    const auto rep = bp::loocv_subjectwise(samples, {bp::parse_units(cfg.units), 0.0});
    auto side = [&](const bp::LoocvSide& s, const std::string& name) {
      return json{{"mae", s.mae},
                  {"rmse", s.rmse},
                  {"in_sample_rmse", s.in_sample_rmse},
                  {"predictions", s.predictions},
                  {"references", s.references},
                  {"agreement", side_agreement(out, "bp_loocv_" + name, name == "sbp" ? "SBP" : "DBP",
                                               s.predictions, s.references)}};
    };
    res.report["subjects"] = rep.subjects;
    res.report["sbp"] = side(rep.sbp, "sbp");
    res.report["dbp"] = side(rep.dbp, "dbp");
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < rep.subjects.size(); ++i)
      rows.push_back({rep.subjects[i], io::num(rep.sbp.predictions[i]), io::num(rep.sbp.references[i]),
                      io::num(rep.dbp.predictions[i]), io::num(rep.dbp.references[i])});
    io::write_csv(out / "bp_loocv.csv", {"subject_id", "sbp_pred", "sbp_ref", "dbp_pred", "dbp_ref"}, rows);
  } catch (const Error& e) {
    errors.push_back(error_json("", e.with_stage("loocv")));
    ++res.subject_errors;
  }
  res.report["errors"] = errors;
  io::write_json(out / "bp_loocv_report.json", res.report);
  write_errors(out, "bp_errors.json", errors);
  return res;
}

}  // namespace phonotrack::cli

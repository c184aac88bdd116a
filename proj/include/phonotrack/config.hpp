#pragma once

// Run configuration shared by every command. File format: one `key = value`
// per line, `#` starts a comment. Keys match the JSON names in to_json().

#include "phonotrack/bp_model.hpp"
#include "phonotrack/envelopes.hpp"
#include "phonotrack/error.hpp"
#include "phonotrack/hr.hpp"
#include "phonotrack/wavelets.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#ifndef PHONOTRACK_VERSION
#define PHONOTRACK_VERSION "1.0.0"
#endif

namespace phonotrack {

inline constexpr std::string_view kVersion = PHONOTRACK_VERSION;
inline constexpr const char* kConfigEnvVar = "PHONOTRACK_CONFIG";

inline EnvelopeMethod parse_method(std::string_view v) {
  if (v == "hilbert") return EnvelopeMethod::Hilbert;
  if (v == "shannon") return EnvelopeMethod::Shannon;
  if (v == "wes") return EnvelopeMethod::Wes;
  fail(ErrorCode::ConfigError, "unknown envelope method '" + std::string(v) + "'");
}

inline std::string method_key(EnvelopeMethod m) {
  switch (m) {
    case EnvelopeMethod::Hilbert: return "hilbert";
    case EnvelopeMethod::Shannon: return "shannon";
    case EnvelopeMethod::Wes: return "wes";
  }
  return "hilbert";
}

inline HrFormula parse_formula(std::string_view v) {
  if (v == "eq7") return HrFormula::Eq7Verbatim;
  if (v == "cycle") return HrFormula::CyclePeriod;
  fail(ErrorCode::ConfigError, "unknown hr formula '" + std::string(v) + "'");
}

inline wavelets::WaveletKind parse_wavelet(std::string_view v) {
  if (v == "morlet") return wavelets::WaveletKind::morlet();
  if (v == "morse") return wavelets::WaveletKind::morse();
  if (v == "bump") return wavelets::WaveletKind::bump();
  fail(ErrorCode::ConfigError, "unknown wavelet '" + std::string(v) + "'");
}

struct RunConfig {
  double frame_len_s = 4.0;
  std::string method = "all";  ///< hilbert | shannon | wes | all
  std::string feature_method = "shannon";  ///< envelope used for BP features and SNR peaks
  std::string formula = "cycle";
  std::string wavelet = "morlet";
  std::string units = "s";
  double working_rate_hz = 2000.0;  ///< PCG resampled to this; 0 keeps the native rate
  double peak_height = 0.15;
  double peak_distance_s = 0.125;
  double baseline_frac = 0.15;
  double smoothing_hz = 20.0;
  int smoothing_order = 4;
  int denoise_levels = 8;
  double denoise_threshold = 0.15;
  double ecg_prominence = 0.8;
  double align_max_lag_s = 0.5;
  double snr_window_ms = 50.0;
  double band_threshold = 0.05;
  bool export_tf = true;  ///< spectrogram / MFCC CSV for the first frame of each subject
  std::string out_dir = "phonotrack_out";  ///< not part of the serialized config

  std::vector<EnvelopeMethod> methods() const {
    if (method == "all") return {EnvelopeMethod::Hilbert, EnvelopeMethod::Shannon, EnvelopeMethod::Wes};
    return {parse_method(method)};
  }

  PipelineParams pipeline() const {
    PipelineParams p;
    p.denoise_levels = denoise_levels;
    p.denoise_threshold = denoise_threshold;
    p.smoothing_cutoff_hz = smoothing_hz;
    p.smoothing_order = smoothing_order;
    p.peaks = {peak_height, peak_distance_s};
    p.baseline_frac = baseline_frac;
    p.wavelet = parse_wavelet(wavelet);
    return p;
  }

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) fail(ErrorCode::ConfigError, std::string("config: ") + what);
    };
    need(frame_len_s >= 1.0 && frame_len_s <= 30.0, "frame_len_s must be in [1, 30]");
    if (method != "all") parse_method(method);
    parse_method(feature_method);
    parse_formula(formula);
    parse_wavelet(wavelet);
    bp::parse_units(units);
    need(working_rate_hz == 0.0 || (working_rate_hz >= 1000.0 && working_rate_hz <= 48000.0),
         "working_rate_hz must be 0 or in [1000, 48000]");
    need(peak_height > 0.0 && peak_height < 1.0, "peak_height must be in (0, 1)");
    need(peak_distance_s > 0.0 && peak_distance_s <= 1.0, "peak_distance_s must be in (0, 1]");
    need(baseline_frac > 0.0 && baseline_frac < 1.0, "baseline_frac must be in (0, 1)");
    need(smoothing_hz > 0.0 && smoothing_hz <= 200.0, "smoothing_hz must be in (0, 200]");
    need(smoothing_order >= 1 && smoothing_order <= 10, "smoothing_order must be in [1, 10]");
    need(denoise_levels >= 1 && denoise_levels <= 12, "denoise_levels must be in [1, 12]");
    need(denoise_threshold >= 0.0 && denoise_threshold < 1.0, "denoise_threshold must be in [0, 1)");
    need(ecg_prominence > 0.0 && ecg_prominence <= 1.0, "ecg_prominence must be in (0, 1]");
    need(align_max_lag_s >= 0.0 && align_max_lag_s <= 5.0, "align_max_lag_s must be in [0, 5]");
    need(snr_window_ms > 0.0 && snr_window_ms <= 500.0, "snr_window_ms must be in (0, 500]");
    need(band_threshold > 0.0 && band_threshold < 1.0, "band_threshold must be in (0, 1)");
  }

  nlohmann::json to_json() const {
    return {{"frame_len_s", frame_len_s},
            {"method", method},
            {"feature_method", feature_method},
            {"formula", formula},
            {"wavelet", wavelet},
            {"units", units},
            {"working_rate_hz", working_rate_hz},
            {"peak_height", peak_height},
            {"peak_distance_s", peak_distance_s},
            {"baseline_frac", baseline_frac},
            {"smoothing_hz", smoothing_hz},
            {"smoothing_order", smoothing_order},
            {"denoise_levels", denoise_levels},
            {"denoise_threshold", denoise_threshold},
            {"ecg_prominence", ecg_prominence},
            {"align_max_lag_s", align_max_lag_s},
            {"snr_window_ms", snr_window_ms},
            {"band_threshold", band_threshold},
            {"export_tf", export_tf}};
  }

  /// Applies one key/value pair given as text.
  void set(std::string_view key, std::string_view value) {
    auto real = [&](double& dst) {
      const std::string s(value);
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size())
        fail(ErrorCode::ConfigError, "config: '" + std::string(key) + "' expects a number");
      dst = v;
    };
    auto integer = [&](int& dst) {
      int v = 0;
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size())
        fail(ErrorCode::ConfigError, "config: '" + std::string(key) + "' expects an integer");
      dst = v;
    };
    if (key == "frame_len_s") real(frame_len_s);
    else if (key == "method") method = value;
    else if (key == "feature_method") feature_method = value;
    else if (key == "formula") formula = value;
    else if (key == "wavelet") wavelet = value;
    else if (key == "units") units = value;
    else if (key == "working_rate_hz") real(working_rate_hz);
    else if (key == "peak_height") real(peak_height);
    else if (key == "peak_distance_s") real(peak_distance_s);
    else if (key == "baseline_frac") real(baseline_frac);
    else if (key == "smoothing_hz") real(smoothing_hz);
    else if (key == "smoothing_order") integer(smoothing_order);
    else if (key == "denoise_levels") integer(denoise_levels);
    else if (key == "denoise_threshold") real(denoise_threshold);
    else if (key == "ecg_prominence") real(ecg_prominence);
    else if (key == "align_max_lag_s") real(align_max_lag_s);
    else if (key == "snr_window_ms") real(snr_window_ms);
    else if (key == "band_threshold") real(band_threshold);
    else if (key == "export_tf") {
      if (value == "true" || value == "1") export_tf = true;
      else if (value == "false" || value == "0") export_tf = false;
      else fail(ErrorCode::ConfigError, "config: export_tf expects true or false");
    } else if (key == "out_dir") out_dir = value;
    else fail(ErrorCode::ConfigError, "config: unknown key '" + std::string(key) + "'");
  }

  /// Rebuilds a config from a report's embedded "config" object.
  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    for (const auto& [k, v] : j.items()) {
      if (double* d = c.field_for(k); d && v.is_number()) *d = v.get<double>();
      else if (v.is_string()) c.set(k, v.get<std::string>());
      else if (v.is_boolean()) c.set(k, v.get<bool>() ? "true" : "false");
      else if (v.is_number_integer()) c.set(k, std::to_string(v.get<long long>()));
      else fail(ErrorCode::ConfigError, "config: unsupported value for '" + k + "'");
    }
    c.validate();
    return c;
  }

 private:
  double* field_for(std::string_view key) {
    if (key == "frame_len_s") return &frame_len_s;
    if (key == "working_rate_hz") return &working_rate_hz;
    if (key == "peak_height") return &peak_height;
    if (key == "peak_distance_s") return &peak_distance_s;
    if (key == "baseline_frac") return &baseline_frac;
    if (key == "smoothing_hz") return &smoothing_hz;
    if (key == "denoise_threshold") return &denoise_threshold;
    if (key == "ecg_prominence") return &ecg_prominence;
    if (key == "align_max_lag_s") return &align_max_lag_s;
    if (key == "snr_window_ms") return &snr_window_ms;
    if (key == "band_threshold") return &band_threshold;
    return nullptr;
  }
};

/// Parses `key = value` lines into an existing config.
inline void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& origin = "config") {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto trim = [](std::string_view v) {
      const auto b = v.find_first_not_of(" \t\r");
      if (b == std::string_view::npos) return std::string_view{};
      return v.substr(b, v.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::ConfigError, origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorCode::ConfigError, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_config_text(cfg, text, path.string());
}

/// Defaults, then the file named by PHONOTRACK_CONFIG (if set), then `path`.
inline RunConfig load_config(const std::filesystem::path& path = {}) {
  RunConfig cfg;
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) apply_config_file(cfg, env);
  if (!path.empty()) apply_config_file(cfg, path);
  return cfg;
}

}  // namespace phonotrack

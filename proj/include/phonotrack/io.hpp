#pragma once

// Disk formats: PCM16 WAV for PCG, plain-text/CSV for ECG, meta.json per
// subject, plus event-based ECG/PCG stream alignment.

#include "phonotrack/error.hpp"
#include "phonotrack/signal.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace phonotrack::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// WAV

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Reads a RIFF/WAVE PCM16 file; multi-channel files yield the first channel.
/// Samples are scaled by 1/32768 into [-1, 1).
inline SampledSignal read_wav_pcm16(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::FileNotFound, "no such file: " + path.string());
  const std::string raw = detail::slurp(path);
  const auto* b = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12 || raw.compare(0, 4, "RIFF") != 0 || raw.compare(8, 4, "WAVE") != 0)
    fail(ErrorCode::MalformedFile, path.string() + ": not a RIFF/WAVE file");

  std::optional<std::uint16_t> channels, bits, format;
  std::uint32_t rate = 0;
  std::optional<std::pair<std::size_t, std::size_t>> data;  // offset, size
  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const std::string id = raw.substr(pos, 4);
    const std::size_t size = detail::read_u32(b + pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > raw.size())
        fail(ErrorCode::MalformedFile, path.string() + ": truncated fmt chunk");
      format = detail::read_u16(b + body);
      channels = detail::read_u16(b + body + 2);
      rate = detail::read_u32(b + body + 4);
      bits = detail::read_u16(b + body + 14);
      if (*format == 0xFFFE && size >= 26) format = detail::read_u16(b + body + 24);
    } else if (id == "data") {
      data = {body, std::min(size, raw.size() - body)};
      break;
    }
    pos = body + size + (size & 1U);
  }
  if (!format) fail(ErrorCode::MalformedFile, path.string() + ": missing fmt chunk");
  if (*format != 1 || *bits != 16)
    fail(ErrorCode::UnsupportedEncoding, path.string() + ": only 16-bit PCM is supported (format " +
                                             std::to_string(*format) + ", " +
                                             std::to_string(*bits) + " bits)");
  if (*channels == 0 || rate == 0) fail(ErrorCode::MalformedFile, path.string() + ": bad header");
  if (!data || data->second < 2u * *channels)
    fail(ErrorCode::ZeroLengthData, path.string() + ": no sample data");

  const std::size_t frame_bytes = 2u * *channels;
  const std::size_t count = data->second / frame_bytes;
  SampledSignal s{std::vector<double>(count), static_cast<double>(rate), SignalLabel::PCG};
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = static_cast<std::int16_t>(detail::read_u16(b + data->first + i * frame_bytes));
    s.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return s;
}

/// Writes mono PCM16; values are rounded from x * 32768 and clipped.
inline void write_wav_pcm16(const fs::path& path, const SampledSignal& s) {
  validate(s, "write_wav_pcm16");
  const auto rate = static_cast<std::uint32_t>(std::lround(s.rate_hz));
  const auto data_bytes = static_cast<std::uint32_t>(s.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, rate);
  detail::put_u32(out, rate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_bytes);
  for (double v : s.samples) {
    const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::FileNotFound, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// ---------------------------------------------------------------------------
// ECG text

namespace detail {

inline std::string trim(std::string_view v) {
  const auto b = v.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = v.find_last_not_of(" \t\r");
  return std::string(v.substr(b, e - b + 1));
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// One value per line, or "time,value" pairs. Blank lines are skipped.
/// Without `rate_hz`, the rate is inferred from the time column.
inline SampledSignal read_ecg_text(const fs::path& path, std::optional<double> rate_hz = {}) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::vector<double> times, values;
  std::string line;
  std::size_t line_no = 0;
  std::optional<bool> two_column;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    const bool pair = comma != std::string::npos;
    if (two_column && *two_column != pair)
      fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                      ": inconsistent column count");
    two_column = pair;
    auto bad = [&] {
      fail(ErrorCode::ParseError,
           path.string() + ":" + std::to_string(line_no) + ": not numeric: \"" + t + "\"");
    };
    if (pair) {
      auto tv = detail::parse_number(detail::trim(std::string_view(t).substr(0, comma)));
      auto vv = detail::parse_number(detail::trim(std::string_view(t).substr(comma + 1)));
      if (!tv || !vv) bad();
      if (!times.empty() && !(*tv > times.back()))
        fail(ErrorCode::NonMonotoneTime, path.string() + ":" + std::to_string(line_no) +
                                             ": time column must increase strictly");
      times.push_back(*tv);
      values.push_back(*vv);
    } else {
      auto vv = detail::parse_number(t);
      if (!vv) bad();
      values.push_back(*vv);
    }
  }
  if (values.empty()) fail(ErrorCode::ZeroLengthData, path.string() + ": empty ECG file");
  double rate = 0.0;
  if (rate_hz) {
    rate = *rate_hz;
  } else if (times.size() >= 2) {
    rate = static_cast<double>(times.size() - 1) / (times.back() - times.front());
  } else {
    fail(ErrorCode::InvalidInput, path.string() + ": sampling rate not given and not inferable");
  }
  if (!(rate > 0.0)) fail(ErrorCode::InvalidInput, path.string() + ": rate must be positive");
  return SampledSignal{std::move(values), rate, SignalLabel::ECG};
}

inline void write_ecg_text(const fs::path& path, const SampledSignal& s) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::FileNotFound, "cannot write " + path.string());
  f.precision(17);
  for (double v : s.samples) f << v << '\n';
}

// ---------------------------------------------------------------------------
// Subject records and dataset directories

struct SubjectRecord {
  std::string subject_id;
  SampledSignal pcg;
  std::optional<SampledSignal> ecg;
  std::optional<double> sbp_ref;
  std::optional<double> dbp_ref;
  nlohmann::json meta = nlohmann::json::object();
};

inline void check_record(const SubjectRecord& r) {
  validate(r.pcg, "pcg");
  if (r.sbp_ref && r.dbp_ref && !(*r.sbp_ref > *r.dbp_ref && *r.dbp_ref > 0.0))
    fail(ErrorCode::InvalidInput, r.subject_id + ": reference BP must satisfy sbp > dbp > 0");
}

/// Loads <dir>/pcg.wav, optional <dir>/ecg.txt and <dir>/meta.json.
/// Recognized meta keys: subject_id, sbp, dbp, ecg_rate_hz; the rest is kept.
inline SubjectRecord load_subject(const fs::path& dir) {
  SubjectRecord r;
  r.subject_id = dir.filename().string();
  const fs::path meta_path = dir / "meta.json";
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    try {
      r.meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, meta_path.string() + ": " + e.what());
    }
    if (r.meta.contains("subject_id")) r.subject_id = r.meta["subject_id"].get<std::string>();
    if (r.meta.contains("sbp")) r.sbp_ref = r.meta["sbp"].get<double>();
    if (r.meta.contains("dbp")) r.dbp_ref = r.meta["dbp"].get<double>();
  }
  r.pcg = read_wav_pcm16(dir / "pcg.wav");
  const fs::path ecg_path = dir / "ecg.txt";
  if (fs::exists(ecg_path)) {
    std::optional<double> rate;
    if (r.meta.contains("ecg_rate_hz")) rate = r.meta["ecg_rate_hz"].get<double>();
    r.ecg = read_ecg_text(ecg_path, rate);
  }
  check_record(r);
  return r;
}

/// Subject folders (those containing pcg.wav), sorted by name.
inline std::vector<fs::path> list_subject_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::FileNotFound, "not a directory: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "pcg.wav")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// ---------------------------------------------------------------------------
// Alignment

struct AlignmentResult {
  double lag_s = 0.0;    ///< add to PCG event times to land on ECG event times
  double score = 0.0;    ///< matched fraction of the shorter list
  std::size_t matched = 0;
  bool low_confidence = false;
};

namespace detail {

struct MatchStats {
  std::size_t count = 0;
  double sq_residual = 0.0;
};

/// One-to-one greedy matching of two sorted lists; symmetric in its arguments.
inline MatchStats match_events(const std::vector<double>& a, const std::vector<double>& b,
                               double shift_b, double tol) {
  MatchStats st;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double d = (b[j] + shift_b) - a[i];
    if (std::abs(d) <= tol) {
      ++st.count;
      st.sq_residual += d * d;
      ++i;
      ++j;
    } else if (d < 0) {
      ++j;
    } else {
      ++i;
    }
  }
  return st;
}

}  // namespace detail

/// Searches lags in 1 ms steps over [-max_lag_s, max_lag_s] for the shift of
/// the PCG S1 events that matches the most ECG R-peaks within +-tolerance.
/// Ties go to the smallest residual, then the smallest |lag|.
inline AlignmentResult align_streams(std::vector<double> ecg_rpeaks, std::vector<double> pcg_s1,
                                     double max_lag_s, double tolerance_s = 0.040) {
  if (ecg_rpeaks.size() < 3 || pcg_s1.size() < 3)
    fail(ErrorCode::InsufficientEvents, "align_streams: need >= 3 events in each stream");
  std::sort(ecg_rpeaks.begin(), ecg_rpeaks.end());
  std::sort(pcg_s1.begin(), pcg_s1.end());
  const auto steps = static_cast<long long>(std::floor(max_lag_s * 1000.0 + 1e-9));
  AlignmentResult best;
  double best_resid = 0.0;
  bool have = false;
  for (long long k = -steps; k <= steps; ++k) {
    const double lag = static_cast<double>(k) / 1000.0;
    const auto st = detail::match_events(ecg_rpeaks, pcg_s1, lag, tolerance_s);
    const double resid = st.count ? st.sq_residual / static_cast<double>(st.count) : 0.0;
    const bool better =
        !have || st.count > best.matched ||
        (st.count == best.matched &&
         (resid < best_resid - 1e-15 ||
          (std::abs(resid - best_resid) <= 1e-15 && std::abs(lag) < std::abs(best.lag_s))));
    if (better) {
      have = true;
      best.lag_s = lag;
      best.matched = st.count;
      best_resid = resid;
    }
  }
  best.score = static_cast<double>(best.matched) /
               static_cast<double>(std::min(ecg_rpeaks.size(), pcg_s1.size()));
  best.low_confidence = best.score < 0.5;
  return best;
}

// ---------------------------------------------------------------------------
// Small output helpers

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::FileNotFound, "cannot write " + path.string());
  f << text;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

/// CSV with a header row; numbers written with round-trip precision.
inline void write_csv(const fs::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < header.size(); ++i) ss << (i ? "," : "") << header[i];
  ss << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) ss << (i ? "," : "") << row[i];
    ss << '\n';
  }
  write_text(path, ss.str());
}

inline std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace phonotrack::io

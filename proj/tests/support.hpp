#pragma once

// Small helpers shared by the unit tests: a seeded generator for property
// tests and a few signal builders.

#include "phonotrack/signal.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace testkit {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }

  std::vector<double> normals(std::size_t n, double sd = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = normal(0.0, sd);
    return v;
  }
  std::vector<double> uniforms(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

/// Runs `body` for `cases` independently seeded generators.
inline void for_all(int cases, std::uint64_t seed, const std::function<void(Gen&)>& body) {
  for (int i = 0; i < cases; ++i) {
    Gen g(seed * 7919 + static_cast<std::uint64_t>(i));
    body(g);
  }
}

inline phonotrack::SampledSignal tone(double freq, double rate, double seconds, double amp = 1.0,
                                      double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  phonotrack::SampledSignal s{std::vector<double>(n), rate, phonotrack::SignalLabel::OTHER};
  for (std::size_t i = 0; i < n; ++i)
    s.samples[i] = amp * std::cos(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate + phase);
  return s;
}

inline double rms_of(const std::vector<double>& x, std::size_t from = 0, std::size_t to = 0) {
  if (to == 0) to = x.size();
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(to - from));
}

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("phonotrack_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testkit

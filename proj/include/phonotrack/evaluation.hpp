#pragma once

// Agreement statistics between an estimator and a reference.

#include "phonotrack/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace phonotrack::eval {

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::LengthMismatch, "pearson_r: lengths differ");
  if (x.size() < 2) fail(ErrorCode::InsufficientData, "pearson_r: need >= 2 pairs");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    fail(ErrorCode::UndefinedCorrelation, "pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double bias_mean = 0.0;
  double bias_sd = 0.0;  ///< sample (n-1) standard deviation of pred - ref
  std::size_t n = 0;
};

inline ErrorMetrics error_metrics(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) fail(ErrorCode::LengthMismatch, "error_metrics: lengths differ");
  if (pred.size() < 2) fail(ErrorCode::InsufficientData, "error_metrics: need >= 2 pairs");
  ErrorMetrics m;
  m.n = pred.size();
  const auto n = static_cast<double>(m.n);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i];
    m.mae += std::abs(d);
    sq += d * d;
    m.bias_mean += d;
  }
  m.mae /= n;
  m.rmse = std::sqrt(sq / n);
  m.bias_mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i] - m.bias_mean;
    var += d * d;
  }
  m.bias_sd = std::sqrt(var / (n - 1.0));
  return m;
}

struct PairedSeries {
  std::vector<double> pred;
  std::vector<double> ref;
};

/// Metrics inside each subject first, then the unweighted mean over subjects.
inline ErrorMetrics subject_aggregate(const std::map<std::string, PairedSeries>& per_subject) {
  if (per_subject.empty()) fail(ErrorCode::InsufficientData, "subject_aggregate: no subjects");
  ErrorMetrics out;
  std::size_t used = 0;
  for (const auto& [id, series] : per_subject) {
    if (series.pred.empty()) continue;
    ErrorMetrics m;
    if (series.pred.size() == 1) {
      const double d = series.pred[0] - series.ref[0];
      m = {std::abs(d), std::abs(d), d, 0.0, 1};
    } else {
      m = error_metrics(series.pred, series.ref);
    }
    out.mae += m.mae;
    out.rmse += m.rmse;
    out.bias_mean += m.bias_mean;
    out.bias_sd += m.bias_sd;
    out.n += m.n;
    ++used;
  }
  if (used == 0) fail(ErrorCode::InsufficientData, "subject_aggregate: every subject is empty");
  const auto k = static_cast<double>(used);
  out.mae /= k;
  out.rmse /= k;
  out.bias_mean /= k;
  out.bias_sd /= k;
  return out;
}

struct AgreementReport {
  double pearson_r = 0.0;  ///< NaN when a side has zero variance
  double mae = 0.0, rmse = 0.0;
  double bias_mean = 0.0, bias_sd = 0.0;
  double loa_low = 0.0, loa_high = 0.0;
  double within_loa_fraction = 0.0;
  std::size_t n = 0;
};

struct BlandAltman {
  AgreementReport report;
  std::vector<double> means;  ///< (pred + ref) / 2
  std::vector<double> diffs;  ///< pred - ref
};

inline BlandAltman bland_altman(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) fail(ErrorCode::LengthMismatch, "bland_altman: lengths differ");
  if (pred.size() < 3) fail(ErrorCode::InsufficientData, "bland_altman: need >= 3 pairs");
  BlandAltman ba;
  const auto m = error_metrics(pred, ref);
  auto& r = ba.report;
  r.n = m.n;
  r.mae = m.mae;
  r.rmse = m.rmse;
  r.bias_mean = m.bias_mean;
  r.bias_sd = m.bias_sd;
  r.loa_low = m.bias_mean - 1.96 * m.bias_sd;
  r.loa_high = m.bias_mean + 1.96 * m.bias_sd;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i];
    ba.means.push_back(0.5 * (pred[i] + ref[i]));
    ba.diffs.push_back(d);
    if (d >= r.loa_low - 1e-12 && d <= r.loa_high + 1e-12) ++inside;
  }
  r.within_loa_fraction = static_cast<double>(inside) / static_cast<double>(pred.size());
  try {
    r.pearson_r = pearson_r(pred, ref);
  } catch (const Error&) {
    r.pearson_r = std::nan("");
  }
  return ba;
}

struct BoxStats {
  double median = 0.0, q1 = 0.0, q3 = 0.0, iqr = 0.0;
  double lower_fence = 0.0, upper_fence = 0.0;
  std::vector<double> outliers;
};

/// Quantile by linear interpolation between order statistics at (n-1)p.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline BoxStats box_stats(std::span<const double> values) {
  if (values.size() < 4) fail(ErrorCode::InsufficientData, "box_stats: need >= 4 values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.q1 = quantile_sorted(v, 0.25);
  b.median = quantile_sorted(v, 0.5);
  b.q3 = quantile_sorted(v, 0.75);
  b.iqr = b.q3 - b.q1;
  b.lower_fence = b.q1 - 1.5 * b.iqr;
  b.upper_fence = b.q3 + 1.5 * b.iqr;
  for (double x : v)
    if (x < b.lower_fence || x > b.upper_fence) b.outliers.push_back(x);
  return b;
}

}  // namespace phonotrack::eval

#pragma once

// Semi-empirical SBP/DBP regression on PCG timing features.
//
// SBP = C1 + s_sys*t_sys + s_rs1*t_rs1 + s_ds1*t_ds1 + s_s1*t_s1 + s_hr*HR
//     + s_hr2*HR^2 + s_sys2*t_sys^2 + s_s12*t_s1^2 + s_rds1*t_rs1*t_ds1
// DBP mirrors it with t_dias, t_rd2, t_dd2, t_s2.

#include "phonotrack/error.hpp"
#include "phonotrack/hr.hpp"
#include "phonotrack/segmentation.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phonotrack::bp {

enum class UnitConvention { Seconds, Milliseconds };

inline std::string_view to_string(UnitConvention u) {
  return u == UnitConvention::Seconds ? "s" : "ms";
}

inline UnitConvention parse_units(std::string_view v) {
  if (v == "s" || v == "seconds" || v == "SECONDS") return UnitConvention::Seconds;
  if (v == "ms" || v == "milliseconds" || v == "MILLISECONDS") return UnitConvention::Milliseconds;
  fail(ErrorCode::ConfigError, "unknown unit convention: " + std::string(v));
}

/// Timing features in seconds plus PCG heart rate in bpm.
struct PcgFeatureVector {
  double t_sys = 0, t_dias = 0, t_rs1 = 0, t_ds1 = 0, t_rd2 = 0, t_dd2 = 0, t_s1 = 0, t_s2 = 0;
  double hr_pcg = 0;
};

inline void check_features(const PcgFeatureVector& f) {
  const std::array<double, 9> all{f.t_sys, f.t_dias, f.t_rs1, f.t_ds1, f.t_rd2,
                                  f.t_dd2, f.t_s1,   f.t_s2,  f.hr_pcg};
  for (double v : all)
    if (!std::isfinite(v) || v < 0.0)
      fail(ErrorCode::InvalidInput, "feature vector entries must be finite and non-negative");
}

inline constexpr std::size_t kTerms = 10;
using Side = std::array<double, kTerms>;

enum class BpSide { Systolic, Diastolic };

inline constexpr std::array<std::string_view, kTerms> kSbpNames = {
    "C1", "sigma_sys", "sigma_rs1", "sigma_ds1", "sigma_s1",
    "sigma_s_HR", "sigma_s_HR2", "sigma_sys2", "sigma_s12", "sigma_rds1"};
inline constexpr std::array<std::string_view, kTerms> kDbpNames = {
    "C2", "alpha_dias", "alpha_rd2", "alpha_dd2", "alpha_s2",
    "alpha_d_HR", "alpha_d_HR2", "alpha_dias2", "alpha_s22", "alpha_rdd2"};

/// Term kinds per position, used for unit rescaling: 0 = intercept,
/// 1 = linear time, 2 = HR, 3 = HR^2, 4 = time^2 or time*time.
inline constexpr std::array<int, kTerms> kTermKind = {0, 1, 1, 1, 1, 2, 3, 4, 4, 4};

struct BpCoefficients {
  Side sbp{};
  Side dbp{};
  UnitConvention units = UnitConvention::Seconds;
  std::string id = "custom";
};

/// Published coefficient set. The second "sigma_rs1"
/// row (48.45) is the t_ds1 coefficient by term order.
inline BpCoefficients table1_coefficients() {
  BpCoefficients c;
  c.sbp = {6.55e-1, -1.112, 4.890e1, 4.845e1, -5.044e1, -6.940e-3, 0.41e-5, 1.689, 2.298e1, -5.902e1};
  c.dbp = {1.799, 2.463, 1.196e1, 7.878, -9.643, -5.291e-2, 3.05e-4, -2.816, 3.049e1, -1.094e1};
  c.units = UnitConvention::Seconds;
  c.id = "table1";
  return c;
}

/// Expanded regressors [1, linear..., HR, HR^2, quadratics, interaction].
inline Side design_row(const PcgFeatureVector& f, BpSide side, UnitConvention units) {
  const double k = units == UnitConvention::Milliseconds ? 1000.0 : 1.0;
  const double hr = f.hr_pcg;
  if (side == BpSide::Systolic) {
    const double ts = f.t_sys * k, r = f.t_rs1 * k, d = f.t_ds1 * k, s1 = f.t_s1 * k;
    return {1.0, ts, r, d, s1, hr, hr * hr, ts * ts, s1 * s1, r * d};
  }
  const double td = f.t_dias * k, r = f.t_rd2 * k, d = f.t_dd2 * k, s2 = f.t_s2 * k;
  return {1.0, td, r, d, s2, hr, hr * hr, td * td, s2 * s2, r * d};
}

inline double dot(const Side& a, const Side& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < kTerms; ++i) acc += a[i] * b[i];
  return acc;
}

inline double predict_side(const PcgFeatureVector& f, const BpCoefficients& c, BpSide side) {
  const Side row = design_row(f, side, c.units);
  const double v = dot(row, side == BpSide::Systolic ? c.sbp : c.dbp);
  if (!std::isfinite(v)) fail(ErrorCode::NumericOverflow, "bp prediction is not finite");
  return v;
}

inline double predict_sbp(const PcgFeatureVector& f, const BpCoefficients& c) {
  return predict_side(f, c, BpSide::Systolic);
}
inline double predict_dbp(const PcgFeatureVector& f, const BpCoefficients& c) {
  return predict_side(f, c, BpSide::Diastolic);
}

struct BpPrediction {
  double sbp = 0.0;
  double dbp = 0.0;
  std::string coefficients_id;
  bool implausible = false;  ///< SBP outside [60, 220] or DBP outside [30, 140]
};

inline BpPrediction predict(const PcgFeatureVector& f, const BpCoefficients& c) {
  BpPrediction p{predict_sbp(f, c), predict_dbp(f, c), c.id, false};
  p.implausible = p.sbp < 60.0 || p.sbp > 220.0 || p.dbp < 30.0 || p.dbp > 140.0;
  return p;
}

/// Same predictions under another time unit.
inline BpCoefficients rescale_units(const BpCoefficients& c, UnitConvention target) {
  if (c.units == target) return c;
  // factor multiplies a time value when moving to `target`.
  const double f = target == UnitConvention::Milliseconds ? 1000.0 : 1e-3;
  BpCoefficients out = c;
  out.units = target;
  for (Side* side : {&out.sbp, &out.dbp}) {
    for (std::size_t i = 0; i < kTerms; ++i) {
      if (kTermKind[i] == 1) (*side)[i] /= f;
      if (kTermKind[i] == 4) (*side)[i] /= f * f;
    }
  }
  return out;
}

inline nlohmann::json to_json(const BpCoefficients& c) {
  nlohmann::json j;
  j["id"] = c.id;
  j["unit_convention"] = std::string(to_string(c.units));
  for (std::size_t i = 0; i < kTerms; ++i) {
    j["sbp"][std::string(kSbpNames[i])] = c.sbp[i];
    j["dbp"][std::string(kDbpNames[i])] = c.dbp[i];
  }
  return j;
}

inline BpCoefficients coefficients_from_json(const nlohmann::json& j) {
  BpCoefficients c;
  try {
    c.id = j.value("id", std::string("custom"));
    c.units = parse_units(j.at("unit_convention").get<std::string>());
    for (std::size_t i = 0; i < kTerms; ++i) {
      c.sbp[i] = j.at("sbp").at(std::string(kSbpNames[i])).get<double>();
      c.dbp[i] = j.at("dbp").at(std::string(kDbpNames[i])).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("coefficient file: ") + e.what());
  }
  for (double v : c.sbp)
    if (!std::isfinite(v)) fail(ErrorCode::ParseError, "coefficient file: non-finite value");
  for (double v : c.dbp)
    if (!std::isfinite(v)) fail(ErrorCode::ParseError, "coefficient file: non-finite value");
  return c;
}

// ---------------------------------------------------------------------------
// Least squares

struct RegressionFit {
  Eigen::VectorXd beta;
  double residual_rms = 0.0;
  double condition_number = 0.0;  ///< of the column-scaled design
  Eigen::Index rank = 0;
};

/// OLS via column-pivoted Householder QR on a column-scaled design. With
/// ridge > 0 the system is augmented with sqrt(ridge) * I, skipping the
/// first column when `intercept_first` is set.
inline RegressionFit fit_multiple_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                             double ridge = 0.0, bool intercept_first = false) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (p == 0 || n != y.size()) fail(ErrorCode::LengthMismatch, "regression: X and y disagree");
  if (n < p && ridge <= 0.0)
    fail(ErrorCode::InsufficientData, "regression: need rows >= columns (" + std::to_string(n) +
                                          " < " + std::to_string(p) + ")");
  if (!X.allFinite() || !y.allFinite()) fail(ErrorCode::InvalidInput, "regression: non-finite input");
  if (ridge < 0.0) fail(ErrorCode::InvalidInput, "regression: ridge must be >= 0");

  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double norm = X.col(j).norm();
    scale(j) = norm > 0.0 ? norm : 1.0;
  }
  Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::MatrixXd A = Xs;
  Eigen::VectorXd b = y;
  if (ridge > 0.0) {
    Eigen::MatrixXd penalty = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = intercept_first ? 1 : 0; j < p; ++j) penalty(j, j) = std::sqrt(ridge) / scale(j);
    // The penalty acts on the unscaled coefficients: beta_j = gamma_j / scale_j.
    A.resize(n + p, p);
    A << Xs, penalty;
    b.resize(n + p);
    b << y, Eigen::VectorXd::Zero(p);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < p)
    fail(ErrorCode::RankDeficient, "regression: design is rank deficient (numerical rank " +
                                       std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
  RegressionFit fit;
  fit.rank = qr.rank();
  const Eigen::VectorXd gamma = qr.solve(b);
  fit.beta = gamma.cwiseQuotient(scale);
  const Eigen::VectorXd resid = y - X * fit.beta;
  fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  const Eigen::VectorXd diag = qr.matrixR().diagonal().cwiseAbs();
  fit.condition_number = diag.maxCoeff() / diag.minCoeff();
  return fit;
}

// ---------------------------------------------------------------------------
// Fitting the BP model

struct BpSample {
  PcgFeatureVector features;
  double sbp_ref = 0.0;
  double dbp_ref = 0.0;
  std::string subject_id;
};

/// Columns actually estimated. t_s1 (t_s2) equals t_rs1 + t_ds1
/// (t_rd2 + t_dd2) by construction, so its linear coefficient cannot be
/// separated from the rise/decay terms; it is fixed at 0 and absorbed.
inline constexpr std::array<std::size_t, kTerms - 1> kFittedTerms = {0, 1, 2, 3, 5, 6, 7, 8, 9};

struct BpFitOptions {
  UnitConvention units = UnitConvention::Seconds;
  double ridge = 0.0;
};

struct BpFit {
  BpCoefficients coefficients;
  double sbp_residual_rms = 0.0;
  double dbp_residual_rms = 0.0;
  double sbp_condition = 0.0;
  double dbp_condition = 0.0;
};

inline BpFit fit_bp_model(const std::vector<BpSample>& data, const BpFitOptions& opt = {}) {
  const std::size_t p = kFittedTerms.size();
  if (data.size() < p)
    fail(ErrorCode::InsufficientData, "fit_bp_model: need at least " + std::to_string(p) +
                                          " subjects, got " + std::to_string(data.size()));
  BpFit out;
  out.coefficients.units = opt.units;
  out.coefficients.id = "fitted";
  for (BpSide side : {BpSide::Systolic, BpSide::Diastolic}) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(p));
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t r = 0; r < data.size(); ++r) {
      check_features(data[r].features);
      const Side row = design_row(data[r].features, side, opt.units);
      for (std::size_t c = 0; c < p; ++c)
        X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[kFittedTerms[c]];
      y(static_cast<Eigen::Index>(r)) = side == BpSide::Systolic ? data[r].sbp_ref : data[r].dbp_ref;
    }
    const auto fit = fit_multiple_regression(X, y, opt.ridge, true);
    Side coef{};
    for (std::size_t c = 0; c < p; ++c) coef[kFittedTerms[c]] = fit.beta(static_cast<Eigen::Index>(c));
    if (side == BpSide::Systolic) {
      out.coefficients.sbp = coef;
      out.sbp_residual_rms = fit.residual_rms;
      out.sbp_condition = fit.condition_number;
    } else {
      out.coefficients.dbp = coef;
      out.dbp_residual_rms = fit.residual_rms;
      out.dbp_condition = fit.condition_number;
    }
  }
  return out;
}

struct LoocvSide {
  double mae = 0.0;
  double rmse = 0.0;
  double in_sample_rmse = 0.0;
  std::vector<double> predictions;  ///< held-out prediction per subject, input order
  std::vector<double> references;
};

struct LoocvReport {
  LoocvSide sbp;
  LoocvSide dbp;
  std::vector<std::string> subjects;
};

/// Leave-one-subject-out: each subject is predicted by a model fitted on the
/// others; metrics use held-out predictions only.
inline LoocvReport loocv_subjectwise(const std::vector<BpSample>& data, const BpFitOptions& opt = {}) {
  const std::size_t min_subjects = kTerms + 2;
  if (data.size() < min_subjects)
    fail(ErrorCode::InsufficientData, "loocv: need at least " + std::to_string(min_subjects) +
                                          " subjects, got " + std::to_string(data.size()));
  LoocvReport rep;
  for (std::size_t k = 0; k < data.size(); ++k) {
    std::vector<BpSample> train;
    train.reserve(data.size() - 1);
    for (std::size_t i = 0; i < data.size(); ++i)
      if (i != k) train.push_back(data[i]);
    const auto fit = fit_bp_model(train, opt);
    rep.sbp.predictions.push_back(predict_sbp(data[k].features, fit.coefficients));
    rep.dbp.predictions.push_back(predict_dbp(data[k].features, fit.coefficients));
    rep.sbp.references.push_back(data[k].sbp_ref);
    rep.dbp.references.push_back(data[k].dbp_ref);
    rep.subjects.push_back(data[k].subject_id);
  }
  const auto full = fit_bp_model(data, opt);
  rep.sbp.in_sample_rmse = full.sbp_residual_rms;
  rep.dbp.in_sample_rmse = full.dbp_residual_rms;
  for (LoocvSide* s : {&rep.sbp, &rep.dbp}) {
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < s->predictions.size(); ++i) {
      const double d = s->predictions[i] - s->references[i];
      abs_sum += std::abs(d);
      sq_sum += d * d;
    }
    const auto n = static_cast<double>(s->predictions.size());
    s->mae = abs_sum / n;
    s->rmse = std::sqrt(sq_sum / n);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Per-subject feature averaging

struct FrameFeatures {
  std::optional<CycleSegmentation> segmentation;
  std::optional<HrEstimate> hr;
};

struct SubjectFeatures {
  PcgFeatureVector features;
  std::size_t valid_frames = 0;
  std::size_t invalid_frames = 0;
};

/// Mean of every feature over frames that have both a segmentation and an
/// accepted HR estimate.
inline SubjectFeatures extract_subject_features(const std::vector<FrameFeatures>& frames) {
  SubjectFeatures out;
  PcgFeatureVector acc;
  for (const auto& f : frames) {
    if (!f.segmentation || !f.hr || !f.hr->accepted()) {
      ++out.invalid_frames;
      continue;
    }
    const auto& s = *f.segmentation;
    acc.t_sys += s.t_sys;
    acc.t_dias += s.t_dias;
    acc.t_rs1 += s.t_rs1;
    acc.t_ds1 += s.t_ds1;
    acc.t_rd2 += s.t_rd2;
    acc.t_dd2 += s.t_dd2;
    acc.t_s1 += s.t_s1;
    acc.t_s2 += s.t_s2;
    acc.hr_pcg += f.hr->bpm;
    ++out.valid_frames;
  }
  if (out.valid_frames == 0) fail(ErrorCode::NoValidFrames, "no valid frames to average");
  const auto n = static_cast<double>(out.valid_frames);
  out.features = {acc.t_sys / n, acc.t_dias / n, acc.t_rs1 / n, acc.t_ds1 / n, acc.t_rd2 / n,
                  acc.t_dd2 / n, acc.t_s1 / n,   acc.t_s2 / n,  acc.hr_pcg / n};
  return out;
}

}  // namespace phonotrack::bp

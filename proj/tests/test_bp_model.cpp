#include "phonotrack/bp_model.hpp"
#include "phonotrack/hr.hpp"
#include "phonotrack/synth.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <map>

using namespace phonotrack;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

bp::PcgFeatureVector zero_features() { return {}; }

bp::PcgFeatureVector random_features(testkit::Gen& g) {
  bp::PcgFeatureVector f;
  f.t_sys = g.uniform(0.2, 0.4);
  f.t_dias = g.uniform(0.3, 0.8);
  f.t_rs1 = g.uniform(0.02, 0.06);
  f.t_ds1 = g.uniform(0.02, 0.07);
  f.t_rd2 = g.uniform(0.015, 0.05);
  f.t_dd2 = g.uniform(0.02, 0.06);
  f.t_s1 = f.t_rs1 + f.t_ds1;
  f.t_s2 = f.t_rd2 + f.t_dd2;
  f.hr_pcg = g.uniform(50, 110);
  return f;
}

bp::BpCoefficients random_coefficients(testkit::Gen& g) {
  bp::BpCoefficients c;
  for (auto& v : c.sbp) v = g.normal(0, 10);
  for (auto& v : c.dbp) v = g.normal(0, 10);
  return c;
}

std::vector<bp::BpSample> cohort_samples(double sbp_sd, double dbp_sd, std::uint64_t seed = 2024,
                                         std::size_t n = 15) {
  synth::CohortOptions opt;
  opt.n_subjects = n;
  opt.sbp_noise_sd = sbp_sd;
  opt.dbp_noise_sd = dbp_sd;
  opt.seed = seed;
  return synth::to_bp_samples(synth::generate_cohort(opt));
}

}  // namespace

TEST_CASE("reference coefficients with zero features return the intercepts") {
  const auto c = bp::table1_coefficients();
  CHECK_THAT(bp::predict_sbp(zero_features(), c), WithinAbs(0.655, 1e-12));
  CHECK_THAT(bp::predict_dbp(zero_features(), c), WithinAbs(1.799, 1e-12));
  CHECK(c.sbp[3] == 48.45);  // second sigma_rs1 row read as sigma_ds1
}

TEST_CASE("term-by-term hand evaluation matches") {
  const auto c = bp::table1_coefficients();
  bp::PcgFeatureVector f;
  f.t_sys = 0.3;
  f.t_rs1 = 0.04;
  f.t_ds1 = 0.05;
  f.t_s1 = 0.09;
  f.t_dias = 0.5;
  f.t_rd2 = 0.03;
  f.t_dd2 = 0.04;
  f.t_s2 = 0.07;
  f.hr_pcg = 72;
  const double ts = 0.3, r = 0.04, d = 0.05, s1 = 0.09, hr = 72;
  const double sbp = 0.655 + (-1.112) * ts + 48.90 * r + 48.45 * d + (-50.44) * s1 + (-6.94e-3) * hr +
                     0.41e-5 * hr * hr + 1.689 * ts * ts + 22.98 * s1 * s1 + (-59.02) * r * d;
  const double td = 0.5, r2 = 0.03, d2 = 0.04, s2 = 0.07;
  const double dbp = 1.799 + 2.463 * td + 11.96 * r2 + 7.878 * d2 + (-9.643) * s2 + (-5.291e-2) * hr +
                     3.05e-4 * hr * hr + (-2.816) * td * td + 30.49 * s2 * s2 + (-10.94) * r2 * d2;
  CHECK_THAT(bp::predict_sbp(f, c), WithinAbs(sbp, 1e-9));
  CHECK_THAT(bp::predict_dbp(f, c), WithinAbs(dbp, 1e-9));
  CHECK_THAT(bp::predict_sbp(f, c), WithinAbs(-0.0980176, 1e-9));
  CHECK_THAT(bp::predict_dbp(f, c), WithinAbs(0.233283, 1e-9));
  CHECK(bp::predict(f, c).implausible);
}

TEST_CASE("predictions are linear in the coefficients") {
  testkit::for_all(100, 71, [](testkit::Gen& g) {
    const auto f = random_features(g);
    const auto a = random_coefficients(g), b = random_coefficients(g);
    bp::BpCoefficients sum;
    for (std::size_t i = 0; i < bp::kTerms; ++i) {
      sum.sbp[i] = a.sbp[i] + b.sbp[i];
      sum.dbp[i] = a.dbp[i] + b.dbp[i];
    }
    REQUIRE_THAT(bp::predict_sbp(f, sum), WithinAbs(bp::predict_sbp(f, a) + bp::predict_sbp(f, b), 1e-9));
    REQUIRE_THAT(bp::predict_dbp(f, sum), WithinAbs(bp::predict_dbp(f, a) + bp::predict_dbp(f, b), 1e-9));
    const auto row = bp::design_row(f, bp::BpSide::Systolic, bp::UnitConvention::Seconds);
    REQUIRE_THAT(bp::predict_sbp(f, a), WithinAbs(bp::dot(row, a.sbp), 1e-12));
  });
}

TEST_CASE("switching the time unit with rescaled coefficients keeps predictions") {
  testkit::for_all(100, 72, [](testkit::Gen& g) {
    const auto f = random_features(g);
    const auto c = random_coefficients(g);
    const auto ms = bp::rescale_units(c, bp::UnitConvention::Milliseconds);
    REQUIRE(ms.units == bp::UnitConvention::Milliseconds);
    REQUIRE_THAT(bp::predict_sbp(f, ms), WithinAbs(bp::predict_sbp(f, c), 1e-9));
    REQUIRE_THAT(bp::predict_dbp(f, ms), WithinAbs(bp::predict_dbp(f, c), 1e-9));
    const auto back = bp::rescale_units(ms, bp::UnitConvention::Seconds);
    REQUIRE_THAT(bp::predict_sbp(f, back), WithinAbs(bp::predict_sbp(f, c), 1e-9));
  });
}

TEST_CASE("coefficients survive a JSON round trip") {
  const auto c = bp::table1_coefficients();
  const auto j = bp::to_json(c);
  CHECK(j["unit_convention"] == "s");
  CHECK(j["sbp"]["C1"] == 0.655);
  const auto back = bp::coefficients_from_json(j);
  CHECK(back.sbp == c.sbp);
  CHECK(back.dbp == c.dbp);
  CHECK(back.id == c.id);
}

TEST_CASE("regression recovers noiseless coefficients exactly") {
  testkit::Gen g(73);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(12, 10);
  for (int i = 0; i < 10; ++i) X(i, i) = 1.0 + i;
  for (int j = 0; j < 10; ++j) {
    X(10, j) = g.normal();
    X(11, j) = g.normal();
  }
  Eigen::VectorXd beta(10);
  for (int j = 0; j < 10; ++j) beta(j) = g.normal(0, 5);
  const auto fit = bp::fit_multiple_regression(X, X * beta);
  for (int j = 0; j < 10; ++j) CHECK_THAT(fit.beta(j), WithinAbs(beta(j), 1e-8));
  CHECK(fit.residual_rms < 1e-10);
  CHECK(fit.rank == 10);
}

TEST_CASE("duplicate columns are rank deficient") {
  testkit::Gen g(74);
  Eigen::MatrixXd X(15, 4);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 4; ++j) X(i, j) = g.normal();
  X.col(3) = X.col(1);
  try {
    bp::fit_multiple_regression(X, Eigen::VectorXd::Ones(15));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
    CHECK(std::string(e.what()).find("rank 3") != std::string::npos);
  }
}

TEST_CASE("residual RMS matches the noise level on average") {
  const int n = 40, p = 6;
  const double sigma = 0.7;
  testkit::Gen g(75);
  double acc = 0.0;
  for (int t = 0; t < 100; ++t) {
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) X(i, j) = g.normal();
    Eigen::VectorXd beta = Eigen::VectorXd::Constant(p, 2.0);
    Eigen::VectorXd y = X * beta;
    for (int i = 0; i < n; ++i) y(i) += g.normal(0, sigma);
    acc += bp::fit_multiple_regression(X, y).residual_rms / 100.0;
  }
  CHECK_THAT(acc, WithinRel(sigma * std::sqrt(double(n - p) / n), 0.2));
}

TEST_CASE("fitting on a noiseless cohort reproduces its targets") {
  const auto data = cohort_samples(0, 0);
  const auto fit = bp::fit_bp_model(data);
  for (const auto& s : data) {
    CHECK_THAT(bp::predict_sbp(s.features, fit.coefficients), WithinAbs(s.sbp_ref, 1e-8));
    CHECK_THAT(bp::predict_dbp(s.features, fit.coefficients), WithinAbs(s.dbp_ref, 1e-8));
  }
  const auto truth = synth::synthetic_reference_coefficients();
  for (std::size_t i : bp::kFittedTerms) CHECK_THAT(fit.coefficients.sbp[i], WithinAbs(truth.sbp[i], 1e-6 * (1 + std::abs(truth.sbp[i]))));
}

TEST_CASE("fitting in milliseconds gives the same predictions") {
  const auto data = cohort_samples(2.1, 3.2);
  const auto s = bp::fit_bp_model(data, {bp::UnitConvention::Seconds, 0.0});
  const auto ms = bp::fit_bp_model(data, {bp::UnitConvention::Milliseconds, 0.0});
  for (const auto& d : data) CHECK_THAT(bp::predict_sbp(d.features, ms.coefficients), WithinAbs(bp::predict_sbp(d.features, s.coefficients), 1e-6));
}

TEST_CASE("LOOCV on a noiseless cohort is exact") {
  const auto rep = bp::loocv_subjectwise(cohort_samples(0, 0));
  CHECK(rep.sbp.mae < 1e-6);
  CHECK(rep.dbp.mae < 1e-6);
  CHECK(rep.subjects.size() == 15);
}

TEST_CASE("LOOCV error exceeds in-sample error on noisy cohorts") {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto rep = bp::loocv_subjectwise(cohort_samples(2.1, 3.2, seed));
    if (rep.sbp.rmse > rep.sbp.in_sample_rmse && rep.dbp.rmse > rep.dbp.in_sample_rmse) ++ok;
  }
  CHECK(ok == 10);
}

TEST_CASE("LOOCV is invariant to subject order") {
  auto data = cohort_samples(2.1, 3.2);
  const auto a = bp::loocv_subjectwise(data);
  std::map<std::string, double> by_id;
  for (std::size_t i = 0; i < a.subjects.size(); ++i) by_id[a.subjects[i]] = a.sbp.predictions[i];
  testkit::Gen g(76);
  std::shuffle(data.begin(), data.end(), std::mt19937_64(77));
  const auto b = bp::loocv_subjectwise(data);
  for (std::size_t i = 0; i < b.subjects.size(); ++i) CHECK_THAT(b.sbp.predictions[i], WithinAbs(by_id[b.subjects[i]], 1e-9));
  CHECK_THAT(b.sbp.mae, WithinAbs(a.sbp.mae, 1e-9));
}

TEST_CASE("too few subjects are rejected with the minimum named") {
  const auto data = cohort_samples(0, 0, 1, 11);
  try {
    bp::loocv_subjectwise(data);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
    CHECK(std::string(e.what()).find("12") != std::string::npos);
  }
  CHECK_THROWS_AS(bp::fit_bp_model(cohort_samples(0, 0, 1, 8)), Error);
}

TEST_CASE("subject features average valid frames only") {
  CycleSegmentation a;
  a.t_sys = 0.30;
  a.t_dias = 0.5;
  a.t_rs1 = a.t_ds1 = a.t_rd2 = a.t_dd2 = 0.03;
  a.t_s1 = a.t_s2 = 0.06;
  a.n_cycles = 4;
  CycleSegmentation b = a;
  b.t_sys = 0.32;
  const auto est = make_estimate(75.0, HrSource::PcgShannon, 0, HrFormula::CyclePeriod);
  const auto bad = make_estimate(300.0, HrSource::PcgShannon, 0, HrFormula::CyclePeriod);
  const auto r = bp::extract_subject_features({{a, est}, {b, est}, {a, bad}, {std::nullopt, std::nullopt}});
  CHECK_THAT(r.features.t_sys, WithinAbs(0.31, 1e-12));
  CHECK(r.features.hr_pcg == 75.0);
  CHECK(r.valid_frames == 2);
  CHECK(r.invalid_frames == 2);
  const auto same = bp::extract_subject_features({{a, est}, {a, est}, {a, est}});
  CHECK(same.features.t_dias == a.t_dias);
  CHECK(same.features.t_s1 == a.t_s1);
  try {
    bp::extract_subject_features({{std::nullopt, est}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoValidFrames);
  }
}

TEST_CASE("a drifting heart rate averages to its midpoint") {
  synth::SynthSpec spec;
  spec.hr_bpm = 60.0;
  spec.hr_end_bpm = 66.0;
  spec.duration_s = 60.0;
  const auto pcg = synth::generate_pcg(spec);
  std::vector<bp::FrameFeatures> frames;
  for (const auto& f : segment_frames(pcg.signal, {4.0, 4.0})) {
    const auto r = hr_pipeline(f.signal, EnvelopeMethod::Shannon, HrFormula::CyclePeriod);
    frames.push_back({r.segmentation, r.hr});
  }
  CHECK_THAT(bp::extract_subject_features(frames).features.hr_pcg, WithinAbs(63.0, 1.0));
}

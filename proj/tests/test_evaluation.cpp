#include "phonotrack/evaluation.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace phonotrack;
using Catch::Matchers::WithinAbs;

using V = std::vector<double>;

TEST_CASE("pearson_r examples") {
  CHECK_THAT(eval::pearson_r(V{1, 2, 3, 4}, V{5, 7, 9, 11}), WithinAbs(1.0, 1e-12));
  CHECK_THAT(eval::pearson_r(V{1, 2, 3}, V{-1, -2, -3}), WithinAbs(-1.0, 1e-12));
  // Centred: (-1,0,1) and (-1,1,0); sxy = 1, sxx = syy = 2.
  CHECK_THAT(eval::pearson_r(V{1, 2, 3}, V{1, 3, 2}), WithinAbs(0.5, 1e-12));
  try {
    eval::pearson_r(V{1, 1, 1}, V{1, 2, 3});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UndefinedCorrelation);
  }
}

TEST_CASE("pearson_r is invariant to positive affine maps") {
  testkit::for_all(100, 91, [](testkit::Gen& g) {
    const auto n = static_cast<std::size_t>(g.integer(3, 200));
    const auto x = g.normals(n), y = g.normals(n);
    const double r = eval::pearson_r(x, y);
    REQUIRE(std::abs(r) <= 1.0);
    auto ax = x, ay = y;
    const double a = std::exp(g.uniform(-3, 3)), b = g.uniform(-100, 100);
    const double c = std::exp(g.uniform(-3, 3)), d = g.uniform(-100, 100);
    for (double& v : ax) v = a * v + b;
    for (double& v : ay) v = c * v + d;
    REQUIRE_THAT(eval::pearson_r(ax, y), WithinAbs(r, 1e-12));
    REQUIRE_THAT(eval::pearson_r(x, ay), WithinAbs(r, 1e-12));
  });
}

TEST_CASE("error_metrics examples") {
  const auto z = eval::error_metrics(V{3, 4, 5}, V{3, 4, 5});
  CHECK(z.mae == 0.0);
  CHECK(z.rmse == 0.0);
  CHECK(z.bias_mean == 0.0);
  CHECK(z.bias_sd == 0.0);

  const auto a = eval::error_metrics(V{1, -1}, V{0, 0});
  CHECK(a.mae == 1.0);
  CHECK(a.rmse == 1.0);
  CHECK(a.bias_mean == 0.0);
  CHECK_THAT(a.bias_sd, WithinAbs(std::sqrt(2.0), 1e-12));

  const auto b = eval::error_metrics(V{2, -2, 1}, V{0, 0, 0});
  CHECK_THAT(b.mae, WithinAbs(5.0 / 3.0, 1e-12));
  CHECK_THAT(b.rmse, WithinAbs(std::sqrt(3.0), 1e-12));
  CHECK_THAT(b.bias_mean, WithinAbs(1.0 / 3.0, 1e-12));
  // Deviations 5/3, -7/3, 2/3: squares sum to 78/9; over n-1 = 2.
  CHECK_THAT(b.bias_sd, WithinAbs(std::sqrt(78.0 / 18.0), 1e-12));

  CHECK_THROWS_AS(eval::error_metrics(V{1, 2}, V{1}), Error);
}

TEST_CASE("RMSE >= MAE >= |bias|") {
  testkit::for_all(200, 92, [](testkit::Gen& g) {
    const auto n = static_cast<std::size_t>(g.integer(2, 100));
    const auto m = eval::error_metrics(g.normals(n, 3.0), g.normals(n));
    REQUIRE(m.rmse >= m.mae - 1e-12);
    REQUIRE(m.mae >= std::abs(m.bias_mean) - 1e-12);
  });
}

TEST_CASE("subject_aggregate averages subjects, not frames") {
  std::map<std::string, eval::PairedSeries> one{{"a", {{1, 2, 3}, {1, 1, 1}}}};
  const auto single = eval::subject_aggregate(one);
  const auto direct = eval::error_metrics(V{1, 2, 3}, V{1, 1, 1});
  CHECK(single.mae == direct.mae);
  CHECK(single.rmse == direct.rmse);

  std::map<std::string, eval::PairedSeries> two{{"a", {{1, 1}, {0, 0}}}, {"b", {{3, 3, 3, 3, 3, 3}, {0, 0, 0, 0, 0, 0}}}};
  CHECK(eval::subject_aggregate(two).mae == 2.0);
  CHECK_THROWS_AS(eval::subject_aggregate({}), Error);
}

TEST_CASE("subject_aggregate matches a brute-force two-stage computation") {
  testkit::for_all(20, 93, [](testkit::Gen& g) {
    std::map<std::string, eval::PairedSeries> m;
    const int subjects = g.integer(1, 15);
    double mae = 0, rmse = 0, bias = 0;
    for (int s = 0; s < subjects; ++s) {
      const auto n = static_cast<std::size_t>(g.integer(2, 15));
      eval::PairedSeries ps{g.normals(n, 2.0), g.normals(n)};
      double a = 0, q = 0, b = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = ps.pred[i] - ps.ref[i];
        a += std::abs(d);
        q += d * d;
        b += d;
      }
      mae += a / n / subjects;
      rmse += std::sqrt(q / n) / subjects;
      bias += b / n / subjects;
      m["s" + std::to_string(s)] = ps;
    }
    const auto r = eval::subject_aggregate(m);
    REQUIRE_THAT(r.mae, WithinAbs(mae, 1e-12));
    REQUIRE_THAT(r.rmse, WithinAbs(rmse, 1e-12));
    REQUIRE_THAT(r.bias_mean, WithinAbs(bias, 1e-12));
  });
}

TEST_CASE("Bland-Altman examples") {
  const auto c = eval::bland_altman(V{105, 115, 125, 135}, V{100, 110, 120, 130}).report;
  CHECK_THAT(c.bias_mean, WithinAbs(5.0, 1e-12));
  CHECK_THAT(c.bias_sd, WithinAbs(0.0, 1e-12));
  CHECK_THAT(c.loa_low, WithinAbs(5.0, 1e-12));
  CHECK_THAT(c.loa_high, WithinAbs(5.0, 1e-12));
  CHECK(c.within_loa_fraction == 1.0);

  const auto h = eval::bland_altman(V{100, 110, 120}, V{102, 108, 121});
  // d = (-2, 2, -1): mean -1/3, deviations (-5/3, 7/3, -2/3), SD = sqrt(78/18).
  const double sd = std::sqrt(78.0 / 18.0);
  CHECK_THAT(h.report.bias_mean, WithinAbs(-1.0 / 3.0, 1e-12));
  CHECK_THAT(h.report.bias_sd, WithinAbs(sd, 1e-12));
  CHECK_THAT(h.report.loa_low, WithinAbs(-1.0 / 3.0 - 1.96 * sd, 1e-12));
  CHECK_THAT(h.report.loa_high, WithinAbs(-1.0 / 3.0 + 1.96 * sd, 1e-12));
  CHECK(h.means == V{101, 109, 120.5});
  CHECK(h.diffs == V{-2, 2, -1});

  const auto s = eval::bland_altman(V{1, -1, 2, -2}, V{0, 0, 0, 0}).report;
  CHECK(s.bias_mean == 0.0);
  CHECK_THROWS_AS(eval::bland_altman(V{1, 2}, V{1, 2}), Error);
}

TEST_CASE("Bland-Altman LoA cover about 95% of Gaussian differences") {
  testkit::for_all(20, 94, [](testkit::Gen& g) {
    const auto ref = g.normals(500, 10.0);
    auto pred = ref;
    for (double& v : pred) v += g.normal(1.5, 3.0);
    const auto r = eval::bland_altman(pred, ref).report;
    REQUIRE(r.within_loa_fraction >= 0.93);
    REQUIRE(r.within_loa_fraction <= 0.97);
    REQUIRE(r.loa_low < r.loa_high);
  });
}

TEST_CASE("box statistics") {
  const auto a = eval::box_stats(V{1, 2, 3, 4, 5});
  CHECK(a.median == 3.0);
  CHECK(a.q1 == 2.0);
  CHECK(a.q3 == 4.0);
  CHECK(a.iqr == 2.0);
  CHECK(a.outliers.empty());
  const auto b = eval::box_stats(V{1, 2, 3, 4, 100});
  CHECK(b.outliers == V{100});
  CHECK_THROWS_AS(eval::box_stats(V{1, 2, 3}), Error);

  testkit::Gen g(95);
  const auto u = eval::box_stats(g.uniforms(1000, 0.0, 1.0));
  CHECK(u.outliers.empty());
  CHECK(u.q1 <= u.median);
  CHECK(u.median <= u.q3);
}

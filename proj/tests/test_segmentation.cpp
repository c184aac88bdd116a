#include "fixtures.hpp"
#include "phonotrack/hr.hpp"
#include "phonotrack/segmentation.hpp"
#include "phonotrack/synth.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

using namespace phonotrack;
using Catch::Matchers::WithinAbs;

namespace {

Envelope env(std::vector<double> v, double rate) {
  return Envelope{SampledSignal{std::move(v), rate, SignalLabel::ENVELOPE}, EnvelopeMethod::Hilbert, 20.0};
}

std::vector<PeakEvent> at_times(const std::vector<double>& t) {
  std::vector<PeakEvent> p;
  for (double v : t) p.push_back({0, v, 1.0, PeakLabel::Unlabeled});
  return p;
}

std::vector<PeakLabel> labels_of(const std::vector<PeakEvent>& p) {
  std::vector<PeakLabel> l;
  for (const auto& e : p) l.push_back(e.label);
  return l;
}

PipelineResult run_synth(const synth::SynthSpec& spec, EnvelopeMethod m = EnvelopeMethod::Shannon) {
  const auto pcg = synth::generate_pcg(spec);
  return hr_pipeline(pcg.signal, m, HrFormula::CyclePeriod);
}

}  // namespace

TEST_CASE("peak fixtures reproduce the expected peak sets and labels") {
  for (const auto& f : fixtures::peak_fixtures()) {
    INFO(f.name);
    const auto e = env(f.envelope, f.rate_hz);
    const auto peaks = find_envelope_peaks(e);
    std::vector<std::size_t> idx;
    for (const auto& p : peaks) idx.push_back(p.index);
    CHECK(idx == f.expected_indices);
    if (!f.expected_labels.empty()) CHECK(labels_of(label_s1_s2(detect_peaks(e))) == f.expected_labels);
    else CHECK_THROWS_AS(detect_peaks(e), Error);
  }
}

TEST_CASE("detect_peaks reports too few peaks") {
  try {
    detect_peaks(env({0, 1, 0, 0.1, 0, 0.9, 0}, 10.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientPeaks);
  }
}

TEST_CASE("a 10-cycle synthetic frame gives exactly 20 peaks") {
  synth::SynthSpec spec;
  spec.hr_bpm = 75;
  spec.duration_s = 8.0;
  const auto r = run_synth(spec);
  CHECK(r.segmentation.peaks.size() == 20);
}

TEST_CASE("label_s1_s2 examples") {
  using enum PeakLabel;
  CHECK(labels_of(label_s1_s2(at_times({0.0, 0.30, 0.80, 1.10}))) == std::vector{S1, S2, S1, S2});
  CHECK(labels_of(label_s1_s2(at_times({0.0, 0.50, 0.80, 1.30}))) == std::vector{S2, S1, S2, S1});
  CHECK(labels_of(label_s1_s2(at_times({0.0, 0.4, 0.8}))) == std::vector{S1, S2, S1});
  CHECK_THROWS_AS(label_s1_s2(at_times({0.0, 0.4})), Error);
}

TEST_CASE("label counts differ by at most one") {
  testkit::for_all(100, 51, [](testkit::Gen& g) {
    std::vector<double> t{0.0};
    const int n = g.integer(3, 40);
    for (int i = 1; i < n; ++i) t.push_back(t.back() + g.uniform(0.13, 1.0));
    const auto l = label_s1_s2(at_times(t));
    const auto s1 = std::count_if(l.begin(), l.end(), [](const PeakEvent& p) { return p.label == PeakLabel::S1; });
    REQUIRE(std::abs(static_cast<long>(s1) - static_cast<long>(l.size() - s1)) <= 1);
  });
}

TEST_CASE("cycle_intervals examples") {
  auto p = label_s1_s2(at_times({0.0, 0.3, 0.8, 1.1, 1.6, 1.9}));
  const auto iv = cycle_intervals(p);
  CHECK_THAT(iv.t_sys, WithinAbs(0.3, 1e-12));
  CHECK_THAT(iv.t_dias, WithinAbs(0.5, 1e-12));
  CHECK(iv.n_cycles == 3);

  std::vector<PeakEvent> single{{0, 0.0, 1.0, PeakLabel::S1}};
  try {
    cycle_intervals(single);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientCycles);
  }
}

TEST_CASE("t_sys + t_dias equals the mean S1 to S1 interval") {
  testkit::for_all(100, 52, [](testkit::Gen& g) {
    std::vector<double> t{g.uniform(0, 0.5)};
    const int cycles = g.integer(2, 12);
    for (int c = 0; c < cycles; ++c) {
      const double sys = g.uniform(0.2, 0.35);
      t.push_back(t.back() + sys);
      t.push_back(t.back() + g.uniform(sys + 0.01, 0.9));
    }
    const auto p = label_s1_s2(at_times(t));
    const auto iv = cycle_intervals(p);
    double s1_span = 0.0;
    std::size_t n = 0;
    double prev = -1.0;
    for (const auto& e : p)
      if (e.label == PeakLabel::S1) {
        if (prev >= 0.0) {
          s1_span += e.time_s - prev;
          ++n;
        }
        prev = e.time_s;
      }
    REQUIRE_THAT(iv.t_sys + iv.t_dias, WithinAbs(s1_span / static_cast<double>(n), 1e-9));
  });
}

TEST_CASE("jittered synthetic t_sys stays within 10 ms of the generator") {
  synth::SynthSpec spec;
  spec.duration_s = 4.0;
  spec.jitter_ms = 10.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    spec.seed = seed;
    const auto r = run_synth(spec);
    const auto truth = synth::generate_pcg(spec).truth;
    CHECK_THAT(r.segmentation.t_sys, WithinAbs(truth.t_sys, 0.010));
  }
}

TEST_CASE("rise and decay of a triangular peak follow similar triangles") {
  // Half-width 40 ms at 1 kHz; the 15% level sits 34 samples from the apex.
  std::vector<double> e(600, 0.0);
  for (std::size_t c : {100u, 300u, 500u})
    for (int d = -40; d <= 40; ++d) e[c + d] = static_cast<double>(40 - std::abs(d)) / 40.0;
  auto peaks = label_s1_s2(detect_peaks(env(e, 1000.0)));
  const auto rd = rise_decay_times(env(e, 1000.0), peaks);
  CHECK_THAT(rd.t_rs1, WithinAbs(0.034, 1e-12));
  CHECK_THAT(rd.t_ds1, WithinAbs(0.034, 1e-12));
  CHECK_THAT(rd.t_rd2, WithinAbs(0.034, 1e-12));
  CHECK_THAT(rd.t_s1, WithinAbs(rd.t_rs1 + rd.t_ds1, 1e-15));
}

TEST_CASE("an impulse envelope rises and decays in one sample") {
  std::vector<double> e(50, 0.0);
  e[10] = e[25] = e[40] = 1.0;
  auto peaks = label_s1_s2(detect_peaks(env(e, 100.0)));
  const auto rd = rise_decay_times(env(e, 100.0), peaks);
  CHECK(rd.t_rs1 == 0.01);
  CHECK(rd.t_ds1 == 0.01);
  CHECK(rd.t_rd2 == 0.01);
  CHECK(rd.t_dd2 == 0.01);
}

TEST_CASE("a symmetric Gaussian burst rises and decays alike") {
  synth::SynthSpec spec;
  spec.duration_s = 8.0;
  spec.s1_sigma_ms = 15.0;
  spec.s2_sigma_ms = 15.0;
  const auto r = run_synth(spec, EnvelopeMethod::Hilbert);
  CHECK_THAT(r.segmentation.t_rs1, WithinAbs(r.segmentation.t_ds1, 0.001));
  CHECK_THAT(r.segmentation.t_rd2, WithinAbs(r.segmentation.t_dd2, 0.001));
}

TEST_CASE("segmentation invariants on synthetic frames") {
  testkit::for_all(12, 53, [](testkit::Gen& g) {
    synth::SynthSpec spec;
    spec.hr_bpm = g.uniform(55, 120);
    spec.t_sys_s = g.uniform(0.25, std::min(0.34, 0.45 * 60.0 / spec.hr_bpm));
    spec.duration_s = 4.0;
    spec.jitter_ms = g.uniform(0, 5);
    spec.seed = static_cast<std::uint64_t>(g.integer(1, 100000));
    const auto seg = run_synth(spec).segmentation;
    for (std::size_t i = 1; i < seg.peaks.size(); ++i) REQUIRE(seg.peaks[i].time_s > seg.peaks[i - 1].time_s);
    for (std::size_t i = 2; i < seg.peaks.size(); ++i)
      if (seg.peaks[i].label == seg.peaks[i - 2].label) REQUIRE(seg.peaks[i].time_s - seg.peaks[i - 2].time_s >= 0.125);
    REQUIRE(seg.n_cycles >= 1);
    for (double d : {seg.t_sys, seg.t_dias, seg.t_rs1, seg.t_ds1, seg.t_rd2, seg.t_dd2}) REQUIRE(d > 0.0);
    REQUIRE(seg.t_s1 == seg.t_rs1 + seg.t_ds1);
    REQUIRE(seg.t_s2 == seg.t_rd2 + seg.t_dd2);
  });
}

TEST_CASE("shifting a frame shifts peaks and keeps intervals") {
  synth::SynthSpec spec;
  spec.duration_s = 6.0;
  spec.snr_db = 30.0;
  const auto pcg = synth::generate_pcg(spec).signal;
  const std::size_t len = 8000;
  // The decimated transform is only shift-invariant for multiples of 2^8.
  for (const auto [shift, tol] : {std::pair{std::size_t{256}, 1.0 / 2000.0 + 1e-12}, std::pair{std::size_t{217}, 0.002}}) {
    SampledSignal a{{pcg.samples.begin() + 1000, pcg.samples.begin() + 1000 + len}, pcg.rate_hz, SignalLabel::PCG};
    SampledSignal b{{pcg.samples.begin() + 1000 - shift, pcg.samples.begin() + 1000 - shift + len}, pcg.rate_hz,
                    SignalLabel::PCG};
    const auto sa = hr_pipeline(a, EnvelopeMethod::Hilbert, HrFormula::CyclePeriod).segmentation;
    const auto sb = hr_pipeline(b, EnvelopeMethod::Hilbert, HrFormula::CyclePeriod).segmentation;
    const double dt = static_cast<double>(shift) / pcg.rate_hz;
    INFO("shift " << shift);
    REQUIRE(sa.peaks.size() == sb.peaks.size());
    for (std::size_t i = 0; i < sa.peaks.size(); ++i)
      CHECK_THAT(sb.peaks[i].time_s, WithinAbs(sa.peaks[i].time_s + dt, tol));
    CHECK_THAT(sb.t_sys, WithinAbs(sa.t_sys, 2 * tol));
    CHECK_THAT(sb.t_dias, WithinAbs(sa.t_dias, 2 * tol));
  }
}

TEST_CASE("peak detection ignores uniform amplitude scaling") {
  synth::SynthSpec spec;
  spec.duration_s = 4.0;
  spec.snr_db = 20.0;
  const auto x = synth::generate_pcg(spec).signal;
  const auto base = hr_pipeline(x, EnvelopeMethod::Shannon, HrFormula::CyclePeriod).segmentation.peaks;
  for (double k : {1e-3, 0.37, 25.0}) {
    SampledSignal y = x;
    for (double& v : y.samples) v *= k;
    const auto p = hr_pipeline(y, EnvelopeMethod::Shannon, HrFormula::CyclePeriod).segmentation.peaks;
    REQUIRE(p.size() == base.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i].index == base[i].index);
  }
}

#include "phonotrack/io.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>

using namespace phonotrack;
namespace fs = std::filesystem;

namespace {

void put16(std::string& s, std::uint16_t v) {
  s += static_cast<char>(v & 0xFF);
  s += static_cast<char>(v >> 8);
}
void put32(std::string& s, std::uint32_t v) {
  put16(s, static_cast<std::uint16_t>(v & 0xFFFF));
  put16(s, static_cast<std::uint16_t>(v >> 16));
}

/// Hand-assembled WAV so the reader is checked against an independent writer.
std::string wav_bytes(std::uint32_t rate, std::uint16_t bits, const std::string& payload,
                      std::uint16_t channels = 1) {
  std::string s = "RIFF";
  put32(s, static_cast<std::uint32_t>(36 + payload.size()));
  s += "WAVEfmt ";
  put32(s, 16);
  put16(s, 1);
  put16(s, channels);
  put32(s, rate);
  put32(s, rate * channels * bits / 8);
  put16(s, static_cast<std::uint16_t>(channels * bits / 8));
  put16(s, bits);
  s += "data";
  put32(s, static_cast<std::uint32_t>(payload.size()));
  return s + payload;
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("read_wav_pcm16 scales fixed-point samples") {
  testkit::TempDir dir("wav");
  std::string payload;
  for (std::int16_t v : {std::int16_t{0}, std::int16_t{16384}, std::int16_t{-32768}})
    put16(payload, static_cast<std::uint16_t>(v));
  dump(dir.path() / "a.wav", wav_bytes(44100, 16, payload));
  const auto s = io::read_wav_pcm16(dir.path() / "a.wav");
  CHECK(s.rate_hz == 44100.0);
  CHECK(s.samples == std::vector<double>{0.0, 0.5, -1.0});
}

TEST_CASE("read_wav_pcm16 takes the first channel of stereo files") {
  testkit::TempDir dir("wav");
  std::string payload;
  for (std::int16_t v : {std::int16_t{100}, std::int16_t{-5}, std::int16_t{200}, std::int16_t{-6}})
    put16(payload, static_cast<std::uint16_t>(v));
  dump(dir.path() / "st.wav", wav_bytes(8000, 16, payload, 2));
  const auto s = io::read_wav_pcm16(dir.path() / "st.wav");
  CHECK(s.samples == std::vector<double>{100.0 / 32768.0, 200.0 / 32768.0});
}

TEST_CASE("read_wav_pcm16 error variants") {
  testkit::TempDir dir("wav");
  CHECK(code_of([&] { io::read_wav_pcm16(dir.path() / "missing.wav"); }) == ErrorCode::FileNotFound);
  dump(dir.path() / "b24.wav", wav_bytes(44100, 24, std::string(9, '\0')));
  CHECK(code_of([&] { io::read_wav_pcm16(dir.path() / "b24.wav"); }) == ErrorCode::UnsupportedEncoding);
  dump(dir.path() / "empty.wav", wav_bytes(44100, 16, ""));
  CHECK(code_of([&] { io::read_wav_pcm16(dir.path() / "empty.wav"); }) == ErrorCode::ZeroLengthData);
  dump(dir.path() / "junk.wav", "not a wav file at all");
  CHECK(code_of([&] { io::read_wav_pcm16(dir.path() / "junk.wav"); }) == ErrorCode::MalformedFile);
}

TEST_CASE("WAV write then read round-trips bit-exactly") {
  testkit::TempDir dir("wav");
  testkit::for_all(20, 21, [&](testkit::Gen& g) {
    const auto n = static_cast<std::size_t>(g.integer(1, 5000));
    SampledSignal s{std::vector<double>(n), static_cast<double>(g.integer(1000, 48000)), SignalLabel::PCG};
    for (double& v : s.samples) v = static_cast<double>(g.integer(-32768, 32767)) / 32768.0;
    const auto p = dir.path() / "rt.wav";
    io::write_wav_pcm16(p, s);
    const auto a = io::read_wav_pcm16(p);
    REQUIRE(a.samples == s.samples);
    REQUIRE(a.rate_hz == s.rate_hz);
    io::write_wav_pcm16(p, a);
    REQUIRE(io::read_wav_pcm16(p).samples == a.samples);
  });
}

TEST_CASE("read_ecg_text formats") {
  testkit::TempDir dir("ecg");
  dump(dir.path() / "v.txt", "0.1\n0.2\n0.3\n");
  const auto a = io::read_ecg_text(dir.path() / "v.txt", 190.0);
  CHECK(a.samples == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(a.rate_hz == 190.0);

  std::string pairs;
  for (int i = 0; i < 11; ++i) pairs += std::to_string(i * 0.005) + "," + std::to_string(i) + "\n";
  dump(dir.path() / "tv.csv", pairs);
  const auto b = io::read_ecg_text(dir.path() / "tv.csv");
  CHECK_THAT(b.rate_hz, Catch::Matchers::WithinRel(200.0, 1e-9));
  CHECK(b.size() == 11);
}

TEST_CASE("read_ecg_text errors cite the line") {
  testkit::TempDir dir("ecg");
  dump(dir.path() / "bad.txt", "abc\n1\n");
  try {
    io::read_ecg_text(dir.path() / "bad.txt", 190.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  dump(dir.path() / "empty.txt", "\n\n");
  CHECK(code_of([&] { io::read_ecg_text(dir.path() / "empty.txt", 190.0); }) == ErrorCode::ZeroLengthData);
  dump(dir.path() / "back.csv", "0,1\n0.01,2\n0.005,3\n");
  CHECK(code_of([&] { io::read_ecg_text(dir.path() / "back.csv"); }) == ErrorCode::NonMonotoneTime);
}

TEST_CASE("load_subject reads the dataset layout") {
  testkit::TempDir dir("subj");
  const auto sd = dir.path() / "s01";
  fs::create_directories(sd);
  io::write_wav_pcm16(sd / "pcg.wav", testkit::tone(50.0, 2000.0, 1.0, 0.5));
  dump(sd / "ecg.txt", "0\n1\n0\n");
  dump(sd / "meta.json", R"({"subject_id": "alpha", "sbp": 120, "dbp": 80, "ecg_rate_hz": 190})");
  const auto r = io::load_subject(sd);
  CHECK(r.subject_id == "alpha");
  CHECK(r.sbp_ref == 120.0);
  CHECK(r.dbp_ref == 80.0);
  REQUIRE(r.ecg.has_value());
  CHECK(r.ecg->rate_hz == 190.0);
  CHECK(io::list_subject_dirs(dir.path()).size() == 1);

  dump(sd / "meta.json", R"({"sbp": 70, "dbp": 80})");
  CHECK(code_of([&] { io::load_subject(sd); }) == ErrorCode::InvalidInput);
}

TEST_CASE("align_streams examples") {
  std::vector<double> r;
  for (int i = 0; i < 20; ++i) r.push_back(0.8 * i + 0.1);
  const auto self = io::align_streams(r, r, 0.5);
  CHECK(self.lag_s == 0.0);
  CHECK(self.score == 1.0);

  auto s1 = r;
  for (double& t : s1) t += 0.250;
  const auto shifted = io::align_streams(r, s1, 0.5);
  CHECK_THAT(shifted.lag_s, Catch::Matchers::WithinAbs(-0.250, 1e-3));
  CHECK(shifted.score == 1.0);

  CHECK(code_of([&] { io::align_streams({0.1, 0.2}, r, 0.5); }) == ErrorCode::InsufficientEvents);
}

TEST_CASE("align_streams on unrelated event lists scores low") {
  int flagged = 0;
  double mean_score = 0.0;
  testkit::for_all(50, 22, [&](testkit::Gen& g) {
    const auto a = g.uniforms(15, 0.0, 60.0);
    const auto b = g.uniforms(15, 0.0, 60.0);
    const auto res = io::align_streams(a, b, 0.5);
    mean_score += res.score / 50.0;
    if (res.low_confidence) ++flagged;
  });
  CHECK(mean_score < 0.5);
  CHECK(flagged >= 45);
}

TEST_CASE("align_streams lag is antisymmetric") {
  testkit::for_all(30, 23, [](testkit::Gen& g) {
    std::vector<double> a;
    double t = g.uniform(0, 1);
    for (int i = 0; i < 30; ++i) a.push_back(t += g.uniform(0.5, 1.2));
    const double lag = g.uniform(-0.4, 0.4);
    std::vector<double> b;
    for (double v : a) b.push_back(v + lag + g.normal(0.0, 0.003));
    const auto ab = io::align_streams(a, b, 0.5);
    const auto ba = io::align_streams(b, a, 0.5);
    REQUIRE_THAT(ab.lag_s, Catch::Matchers::WithinAbs(-ba.lag_s, 1e-12));
    REQUIRE_THAT(ab.lag_s, Catch::Matchers::WithinAbs(-lag, 0.01));
  });
}

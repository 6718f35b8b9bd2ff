#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sentinel/domain.hpp"

using namespace sentinel;

TEST_CASE("thresholds: defaults validate") {
  const Thresholds t = validate_thresholds(Thresholds{});
  CHECK(t.tau1 == doctest::Approx(0.45));
  CHECK(t.tau2 == doctest::Approx(1.5e-3));
  CHECK(t.tau_c == doctest::Approx(0.54));
  CHECK(t.tau_h == doctest::Approx(2.3));
  CHECK(t.tau_s == doctest::Approx(0.75));
  CHECK(t.lambda1 == doctest::Approx(0.4));
  CHECK(t.lambda2 == doctest::Approx(0.6));
}

TEST_CASE("thresholds: symmetric weights are fine") {
  Thresholds t;
  t.lambda1 = 0.5;
  t.lambda2 = 0.5;
  CHECK_NOTHROW(validate_thresholds(t));
}

TEST_CASE("thresholds: violations name the failing field") {
  Thresholds t;
  t.tau_c = 1.5;
  try {
    validate_thresholds(t);
    FAIL("expected BoundViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bound_violation);
    CHECK(std::string(e.what()).find("tau_c") != std::string::npos);
  }

  Thresholds w;
  w.lambda1 = 0.5;  // lambda2 stays 0.6
  try {
    validate_thresholds(w);
    FAIL("expected WeightSumViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::weight_sum_violation);
  }

  Thresholds z;
  z.tau2 = 0.0;
  CHECK_THROWS_AS(validate_thresholds(z), Error);
}

TEST_CASE("thresholds: case-study configuration") {
  const Thresholds t = validate_thresholds(case_study_thresholds());
  CHECK(t.tau1 == doctest::Approx(0.85));
  CHECK(t.tau2 == doctest::Approx(0.12));
  CHECK(t.tau_c == doctest::Approx(0.54));
}

TEST_CASE("frame: invariants") {
  Frame f = oracles::make_frame(16, 8, 3, 1);
  CHECK_NOTHROW(f.validate());

  Frame small = oracles::make_frame(16, 8, 3, 1);
  small.height = 4;
  small.pixels.resize(16 * 4 * 3);
  CHECK_THROWS_AS(small.validate(), Error);

  Frame bad_len = oracles::make_frame(16, 8, 3, 1);
  bad_len.pixels.pop_back();
  CHECK_THROWS_AS(bad_len.validate(), Error);

  Frame out_of_range = oracles::make_frame(16, 8, 1, 1);
  out_of_range.pixels[5] = 1.5f;
  CHECK_THROWS_AS(out_of_range.validate(), Error);
}

TEST_CASE("frame: JSON round-trip is identity for all fields") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Frame f = oracles::make_frame(8 + static_cast<int>(seed) % 12 * 2, 8,
                                  seed % 2 == 0 ? 3 : 1, seed, "cam_a",
                                  static_cast<std::int64_t>(seed) * 7);
    if (seed % 3 == 0) {
      f.seed_tag = FrameTag{"noise_burst", seed * 31};
    }
    nlohmann::json j = f;
    const Frame back = j.get<Frame>();
    CHECK(back == f);
  }
}

TEST_CASE("labels: names, ordering, custom validation") {
  const AnomalyLabel benign;
  CHECK(benign.is_benign());
  CHECK(benign.name() == "benign");
  CHECK(AnomalyLabel::from_name("camera_blocked").kind() ==
        AnomalyLabel::Kind::camera_blocked);

  const AnomalyLabel c = AnomalyLabel::custom("gate_breach");
  CHECK(c.kind() == AnomalyLabel::Kind::custom);
  CHECK(c.name() == "gate_breach");
  CHECK(AnomalyLabel::from_name("gate_breach") == c);

  CHECK_THROWS_AS(AnomalyLabel::custom(""), Error);
  CHECK_THROWS_AS(AnomalyLabel::custom("Bad"), Error);
  CHECK_THROWS_AS(AnomalyLabel::custom("has space"), Error);

  // lexicographic order by name
  CHECK(AnomalyLabel(AnomalyLabel::Kind::camera_blocked) <
        AnomalyLabel(AnomalyLabel::Kind::person_detected));
}

TEST_CASE("pnm: P5 and P6 import") {
  // 8x8 grayscale ramp
  std::string p5 = "P5\n# test\n8 8\n255\n";
  for (int i = 0; i < 64; ++i) p5.push_back(static_cast<char>(i * 4));
  std::istringstream in5(p5);
  const Frame g = read_pnm(in5, "gray_cam", 3);
  CHECK(g.width == 8);
  CHECK(g.height == 8);
  CHECK(g.channels == 1);
  CHECK(g.camera_id == "gray_cam");
  CHECK(g.stream_time == 3);
  CHECK(g.pixels[0] == doctest::Approx(0.0));
  CHECK(g.pixels[63] == doctest::Approx(252.0 / 255.0));

  std::string p6 = "P6 8 8 255\n";
  for (int i = 0; i < 64 * 3; ++i) p6.push_back(static_cast<char>(255));
  std::istringstream in6(p6);
  const Frame c = read_pnm(in6, "color_cam", 0);
  CHECK(c.channels == 3);
  CHECK(c.pixels[10] == doctest::Approx(1.0));

  std::istringstream bad_magic("P4 8 8 255 xxxx");
  CHECK_THROWS_AS(read_pnm(bad_magic, "x", 0), Error);

  std::istringstream bad_maxval("P5 8 8 65535\n");
  CHECK_THROWS_AS(read_pnm(bad_maxval, "x", 0), Error);

  std::string truncated = "P5 8 8 255\nabc";
  std::istringstream in_t(truncated);
  CHECK_THROWS_AS(read_pnm(in_t, "x", 0), Error);
}

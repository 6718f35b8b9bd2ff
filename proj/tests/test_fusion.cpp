#include <cmath>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "sentinel/fusion.hpp"

using namespace sentinel;
using namespace sentinel::fusion;

namespace {

CascadeResult verdict_of(const std::string& camera, std::int64_t tick,
                         const std::string& label, double conf = 0.9,
                         double err = -1.0) {
  CascadeResult r;
  r.frame_ref = {camera, tick};
  if (err >= 0.0) {
    r.verdicts.push_back(StageVerdict{Stage::object_detection, 0.1,
                                      AnomalyLabel(), false, 0.034, ""});
    r.verdicts.push_back(StageVerdict{Stage::reconstruction, err,
                                      AnomalyLabel::from_name(label), true, 0.062,
                                      ""});
    r.exit_stage = Stage::reconstruction;
  } else {
    r.verdicts.push_back(StageVerdict{Stage::object_detection, conf,
                                      AnomalyLabel::from_name(label), true, 0.034,
                                      ""});
    r.exit_stage = Stage::object_detection;
  }
  r.final_label = AnomalyLabel::from_name(label);
  r.total_latency = 0.0;
  for (const auto& v : r.verdicts) r.total_latency += v.elapsed;
  return r;
}

}  // namespace

TEST_CASE("severity: fusion arithmetic and alert gate") {
  const Thresholds t;  // lambda 0.4/0.6, tau_s 0.75
  const SeverityResult r = severity({0.92, 0.84}, t);
  CHECK(r.score == doctest::Approx(0.872).epsilon(1e-13));
  CHECK(r.alert);

  CHECK(severity({1.0, 1.0}, t).score == doctest::Approx(1.0));
  CHECK(severity({1.0, 1.0}, t).alert);
  CHECK(severity({0.0, 0.0}, t).score == doctest::Approx(0.0));
  CHECK_FALSE(severity({0.0, 0.0}, t).alert);

  CHECK_THROWS_AS(severity({1.5, 0.0}, t), Error);
}

TEST_CASE("severity: monotone in each input, symmetric under paired swap") {
  Thresholds t;
  double prev = -1.0;
  for (double v : {0.0, 0.3, 0.6, 0.9}) {
    const double s = severity({v, 0.5}, t).score;
    CHECK(s >= prev);
    prev = s;
  }
  prev = -1.0;
  for (double c : {0.0, 0.3, 0.6, 0.9}) {
    const double s = severity({0.5, c}, t).score;
    CHECK(s >= prev);
    prev = s;
  }
  // swapping both the weights and the inputs leaves the score unchanged
  Thresholds swapped = t;
  std::swap(swapped.lambda1, swapped.lambda2);
  CHECK(severity({0.92, 0.84}, t).score ==
        doctest::Approx(severity({0.84, 0.92}, swapped).score).epsilon(1e-15));
}

TEST_CASE("merge_events: run-length merge on the worked sequence") {
  // labels [A,A,B,B,B,Benign,A] at ticks 1..7
  std::vector<CascadeResult> verdicts;
  verdicts.push_back(verdict_of("cam", 1, "person_detected"));
  verdicts.push_back(verdict_of("cam", 2, "person_detected"));
  verdicts.push_back(verdict_of("cam", 3, "camera_blocked"));
  verdicts.push_back(verdict_of("cam", 4, "camera_blocked"));
  verdicts.push_back(verdict_of("cam", 5, "camera_blocked"));
  verdicts.push_back(verdict_of("cam", 6, "benign"));
  verdicts.push_back(verdict_of("cam", 7, "person_detected"));

  for (std::int64_t gap : {0, 1}) {
    const auto events = merge_events(verdicts, gap);
    REQUIRE(events.size() == 3);
    CHECK(events[0].label == AnomalyLabel::from_name("person_detected"));
    CHECK(events[0].start_frame == 1);
    CHECK(events[0].end_frame == 2);
    CHECK(events[0].frame_count == 2);
    CHECK(events[1].label == AnomalyLabel::from_name("camera_blocked"));
    CHECK(events[1].start_frame == 3);
    CHECK(events[1].end_frame == 5);
    CHECK(events[2].start_frame == 7);
    CHECK(events[2].frame_count == 1);
  }

  // with a wide enough gap the trailing A joins the first run
  const auto wide = merge_events(verdicts, 4);
  REQUIRE(wide.size() == 2);
  CHECK(wide[0].label == AnomalyLabel::from_name("person_detected"));
  CHECK(wide[0].start_frame == 1);
  CHECK(wide[0].end_frame == 7);
  CHECK(wide[0].frame_count == 3);
}

TEST_CASE("merge_events: unsorted input rejected, benign-only input empty") {
  std::vector<CascadeResult> bad;
  bad.push_back(verdict_of("cam", 5, "person_detected"));
  bad.push_back(verdict_of("cam", 2, "person_detected"));
  CHECK_THROWS_AS(merge_events(bad, 0), Error);

  std::vector<CascadeResult> benign;
  benign.push_back(verdict_of("cam", 1, "benign"));
  benign.push_back(verdict_of("cam", 2, "benign"));
  CHECK(merge_events(benign, 0).empty());
}

TEST_CASE("merge_events: per-event error statistics from stage-II members") {
  std::vector<CascadeResult> verdicts;
  verdicts.push_back(verdict_of("cam", 1, "illumination_shift", 0.9, 0.18));
  verdicts.push_back(verdict_of("cam", 2, "illumination_shift", 0.9, 0.10));
  verdicts.push_back(verdict_of("cam", 3, "illumination_shift", 0.9, 0.26));
  const auto events = merge_events(verdicts, 0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].error_stats.samples == 3);
  CHECK(events[0].error_stats.min == doctest::Approx(0.10));
  CHECK(events[0].error_stats.mean == doctest::Approx((0.18 + 0.10 + 0.26) / 3.0));
  CHECK(events[0].error_stats.max == doctest::Approx(0.26));
  CHECK(events[0].mean_confidence == doctest::Approx(0.18));  // stage-II exit conf

  // stage-I exits carry no reconstruction stats
  const auto lean = merge_events({verdict_of("cam", 9, "person_detected")}, 0);
  CHECK(lean[0].error_stats.samples == 0);
}

TEST_CASE("merge_events: agrees with the brute-force oracle on random tapes") {
  const char* labels[] = {"benign", "person_detected", "camera_blocked",
                          "illumination_shift"};
  std::uint64_t state = 2024;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<CascadeResult> verdicts;
    const int cameras = 1 + static_cast<int>(next() % 3);
    for (int cam = 0; cam < cameras; ++cam) {
      std::int64_t tick = 0;
      const int n = 5 + static_cast<int>(next() % 60);
      for (int i = 0; i < n; ++i) {
        tick += 1 + static_cast<std::int64_t>(next() % 4);  // occasional holes
        verdicts.push_back(verdict_of("cam" + std::to_string(cam), tick,
                                      labels[next() % 4]));
      }
    }
    const std::int64_t gap = static_cast<std::int64_t>(next() % 4);
    const auto got = merge_events(verdicts, gap);
    const auto expected = oracles::merge_reference(verdicts, gap);
    REQUIRE(got.size() == expected.size());
    std::size_t anomalous = 0;
    for (const auto& r : verdicts) {
      if (!r.final_label.is_benign()) ++anomalous;
    }
    std::size_t merged_frames = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].camera_id == expected[i].camera);
      CHECK(got[i].label == expected[i].label);
      CHECK(got[i].start_frame == expected[i].start);
      CHECK(got[i].end_frame == expected[i].end);
      CHECK(got[i].frame_count == expected[i].frames);
      merged_frames += got[i].frame_count;
    }
    CHECK(merged_frames == anomalous);  // conservation
  }
}

TEST_CASE("merge_events: stitching two halves equals merging the whole") {
  std::vector<CascadeResult> verdicts;
  std::uint64_t state = 3131;
  std::int64_t tick = 0;
  for (int i = 0; i < 200; ++i) {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    tick += 1 + static_cast<std::int64_t>(state % 3);
    verdicts.push_back(verdict_of(
        "cam", tick, state % 2 ? "person_detected" : "benign"));
  }
  const auto whole = merge_events(verdicts, 1);
  // Split, merge halves, and re-merge the boundary via the oracle equivalence.
  const std::vector<CascadeResult> left(verdicts.begin(), verdicts.begin() + 97);
  const std::vector<CascadeResult> right(verdicts.begin() + 97, verdicts.end());
  auto stitched = merge_events(left, 1);
  const auto right_events = merge_events(right, 1);
  for (const auto& e : right_events) {
    if (!stitched.empty() && stitched.back().label == e.label &&
        stitched.back().camera_id == e.camera_id &&
        e.start_frame - stitched.back().end_frame - 1 <= 1) {
      stitched.back().end_frame = e.end_frame;
      stitched.back().frame_count += e.frame_count;
    } else {
      stitched.push_back(e);
    }
  }
  REQUIRE(stitched.size() == whole.size());
  for (std::size_t i = 0; i < whole.size(); ++i) {
    CHECK(stitched[i].start_frame == whole[i].start_frame);
    CHECK(stitched[i].end_frame == whole[i].end_frame);
    CHECK(stitched[i].frame_count == whole[i].frame_count);
  }
}

TEST_CASE("psnr: closed forms and sentinel") {
  CHECK(std::isinf(psnr_from_mse(0.0)));
  CHECK(psnr_from_mse(1e-4) == 40.0);  // exact
  CHECK(psnr_from_mse(1.47e-4) == doctest::Approx(38.326).epsilon(1e-3));
  CHECK(psnr_from_mse(1.0) == doctest::Approx(0.0));

  // strictly decreasing in MSE
  double prev = std::numeric_limits<double>::infinity();
  for (double m : {1e-6, 1e-4, 1e-2, 0.5, 1.0}) {
    const double p = psnr_from_mse(m);
    CHECK(p < prev);
    prev = p;
  }

  Frame x = oracles::make_frame(8, 8, 1, 1);
  CHECK(std::isinf(psnr({x, x})));
}

TEST_CASE("ssim: identical frames, two-constant closed form, oracle") {
  const Frame x = oracles::make_frame(32, 32, 3, 11);
  CHECK(ssim({x, x}, 8) == 1.0);

  // constant 0 vs constant 1: means (0,1), variances 0. The general formula
  // collapses to (C1*C2) / ((1+C1)*C2), i.e. C1/(1+C1).
  Frame zero = oracles::make_frame(16, 16, 1, 1);
  for (auto& px : zero.pixels) px = 0.0f;
  Frame one = zero;
  for (auto& px : one.pixels) px = 1.0f;
  const double c1 = 1e-4, c2 = 9e-4;
  const double closed_form = (c1 * c2) / ((1.0 + c1) * c2);
  CHECK(ssim({zero, one}, 8) == doctest::Approx(closed_form).epsilon(1e-12));

  // random pairs against the independent reimplementation, including
  // non-divisible shapes with partial edge tiles
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const int w = 8 + static_cast<int>(seed % 5) * 5;  // 8..28
    const int h = 8 + static_cast<int>(seed % 3) * 7;
    const int ch = seed % 2 ? 1 : 3;
    const Frame a = oracles::make_frame(w, h, ch, seed);
    const Frame b = oracles::make_frame(w, h, ch, seed + 1000);
    CHECK(ssim({a, b}, 8) ==
          doctest::Approx(oracles::ssim_reference(a, b, 8)).epsilon(1e-10));
  }

  CHECK_THROWS_AS(ssim({zero, one}, 17), Error);  // window > min(H, W)
}

TEST_CASE("mae: closed forms and oracle") {
  Frame zero = oracles::make_frame(8, 8, 3, 1);
  for (auto& px : zero.pixels) px = 0.0f;
  Frame one = zero;
  for (auto& px : one.pixels) px = 1.0f;
  CHECK(mae({zero, zero}) == doctest::Approx(0.0));
  CHECK(mae({zero, one}) == doctest::Approx(1.0));

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Frame a = oracles::make_frame(16, 16, 3, seed);
    const Frame b = oracles::make_frame(16, 16, 3, seed + 99);
    CHECK(mae({a, b}) ==
          doctest::Approx(oracles::mae_reference(a, b)).epsilon(1e-13));
    // mae and mse vanish together
    CHECK((mae({a, b}) == 0.0) == (oracles::mse_reference(a, b) == 0.0));
  }
}

TEST_CASE("accounting: closed-form identity and degenerate splits") {
  const StageLatencies lat{0.034, 0.062, 1.82};

  std::vector<CascadeResult> all_stage1;
  for (int i = 0; i < 10; ++i) {
    all_stage1.push_back(verdict_of("cam", i, "person_detected"));
    all_stage1.back().total_latency = 0.034;
  }
  RunMetrics m = accounting(all_stage1, lat, 8.7);
  CHECK(m.mean_latency == doctest::Approx(0.034));
  CHECK(m.exit_fractions[0] == doctest::Approx(1.0));
  CHECK(m.closed_form_latency == doctest::Approx(0.034));

  std::vector<CascadeResult> all_stage3;
  for (int i = 0; i < 10; ++i) {
    CascadeResult r = verdict_of("cam", i, "benign");
    r.exit_stage = Stage::semantic;
    r.total_latency = 0.034 + 0.062 + 1.82;
    all_stage3.push_back(r);
  }
  m = accounting(all_stage3, lat, 8.7);
  CHECK(m.mean_latency == doctest::Approx(0.034 + 0.062 + 1.82));
  CHECK(m.speedup_ratio == doctest::Approx(8.7 / (0.034 + 0.062 + 1.82)));
  CHECK(m.speedup_ratio >= 1.0);  // baseline above the full pipeline cost

  CHECK_THROWS_AS(accounting({}, lat, 8.7), Error);

  // the worked mix: fractions (0.713, 0.186, 0.101)
  std::vector<CascadeResult> mixed;
  auto push_n = [&mixed](int n, Stage stage, double latency) {
    for (int i = 0; i < n; ++i) {
      CascadeResult r;
      r.frame_ref = {"cam", static_cast<std::int64_t>(mixed.size())};
      r.exit_stage = stage;
      r.final_label = AnomalyLabel();
      r.total_latency = latency;
      r.verdicts.push_back(StageVerdict{stage, 0.5, AnomalyLabel(), true, latency, ""});
      mixed.push_back(r);
    }
  };
  push_n(713, Stage::object_detection, 0.034);
  push_n(186, Stage::reconstruction, 0.034 + 0.062);
  push_n(101, Stage::semantic, 0.034 + 0.062 + 1.82);
  m = accounting(mixed, lat, 8.7);
  CHECK(m.mean_latency == doctest::Approx(0.235614).epsilon(1e-12));
  CHECK(m.closed_form_latency == doctest::Approx(m.mean_latency).epsilon(1e-12));
  CHECK(m.speedup_ratio == doctest::Approx(8.7 / 0.235614).epsilon(1e-9));
  CHECK(m.speedup_ratio == doctest::Approx(36.92).epsilon(1e-3));
  double fraction_sum = 0.0;
  for (double f : m.exit_fractions) fraction_sum += f;
  CHECK(fraction_sum == doctest::Approx(1.0).epsilon(1e-12));
}

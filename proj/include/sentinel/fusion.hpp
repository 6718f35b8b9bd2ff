#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sentinel/cascade.hpp"
#include "sentinel/domain.hpp"

// Post-cascade behavior: fusing correlated detections into a severity score,
// collapsing per-frame verdicts into events, and the quality/efficiency
// metrics used for reporting.

namespace sentinel::fusion {

// Reconstruction-error statistics over the member frames of an event that
// actually executed the reconstruction stage. samples == 0 means none did.
struct ErrorStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
  std::size_t samples = 0;

  bool operator==(const ErrorStats&) const = default;
};

// A merged run of same-label anomalous frame verdicts on one camera.
struct Event {
  AnomalyLabel label;
  std::string camera_id;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::size_t frame_count = 0;
  ErrorStats error_stats;
  double mean_confidence = 0.0;
  std::string source;  // stream identifier

  bool operator==(const Event&) const = default;
};

struct SeverityInput {
  double conf_visual = 0.0;
  double conf_contextual = 0.0;
};

struct SeverityResult {
  double score = 0.0;
  bool alert = false;
};

// score = lambda1 * conf_visual + lambda2 * conf_contextual; alert when the
// score reaches tau_s.
SeverityResult severity(const SeverityInput& input, const Thresholds& t);

// Merges consecutive anomalous verdicts of the same label on the same camera
// into events. Two member frames join the same event when the count of ticks
// strictly between them is <= gap. Benign verdicts never join events. Input
// must be sorted by (camera_id, stream_time); throws Errc::unsorted_input.
std::vector<Event> merge_events(const std::vector<CascadeResult>& verdicts,
                                std::int64_t gap = 0);

// PSNR in dB with MAX = 1 (normalized pixels). Zero MSE yields +infinity.
double psnr_from_mse(double mse);
double psnr(const cascade::ReconstructionPair& pair);

// Mean local SSIM over non-overlapping windows (stride = window), constants
// C1 = 0.01^2, C2 = 0.03^2, computed per channel then averaged. Partial edge
// windows are included. Throws Errc::window_too_large.
double ssim(const cascade::ReconstructionPair& pair, int window = 8);

// Mean absolute difference, in [0,1].
double mae(const cascade::ReconstructionPair& pair);

struct StageLatencies {
  double object_detection = 0.034;
  double reconstruction = 0.062;
  double semantic = 1.82;
};

struct RunMetrics {
  std::size_t frames_total = 0;
  std::array<std::size_t, 3> exits_by_stage{};  // indices 0,1,2 = stages I,II,III
  std::array<double, 3> exit_fractions{};
  double mean_latency = 0.0;
  // Expected mean under fixed stage latencies:
  //   p1*L1 + p2*(L1+L2) + p3*(L1+L2+L3)
  double closed_form_latency = 0.0;
  double baseline_latency = 0.0;  // all-stage-III counterfactual, s/frame
  double speedup_ratio = 0.0;     // baseline / mean
  std::size_t events_total = 0;
};

// Folds exit counts and latency statistics over a set of results. Throws
// Errc::empty_run on an empty input.
RunMetrics accounting(const std::vector<CascadeResult>& results,
                      const StageLatencies& latencies, double baseline);

void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);
void to_json(nlohmann::json& j, const RunMetrics& m);
void from_json(const nlohmann::json& j, RunMetrics& m);

}  // namespace sentinel::fusion

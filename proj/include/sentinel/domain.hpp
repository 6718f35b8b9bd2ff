#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sentinel/errors.hpp"

namespace sentinel {

// Provenance tag a synthetic generator stamps onto a frame: the scripted
// scenario class it was drawn for and a per-frame draw id. Stage backends
// key their deterministic randomness off this.
struct FrameTag {
  std::string scenario_class;
  std::uint64_t draw_id = 0;

  bool operator==(const FrameTag&) const = default;
};

// One video frame. Pixels are row-major, channel-interleaved intensities
// in [0, 1].
struct Frame {
  std::string camera_id;
  std::int64_t stream_time = 0;  // frame index (tick)
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 or 3
  std::vector<float> pixels;
  std::optional<FrameTag> seed_tag;

  std::size_t pixel_count() const { return pixels.size(); }

  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  // Throws Errc::bound_violation when any invariant fails.
  void validate() const;

  bool operator==(const Frame&) const = default;
};

// Anomaly category: a closed set plus an open custom variant. Benign is the
// unique abstention outcome. Labels order and compare by snake_case name.
class AnomalyLabel {
 public:
  enum class Kind {
    obstructed_view,
    person_detected,
    camera_blocked,
    suspicious_behavior,
    frozen_stream,
    illumination_shift,
    benign,
    custom,
  };

  AnomalyLabel() : AnomalyLabel(Kind::benign) {}
  explicit AnomalyLabel(Kind kind);

  // Custom names must be nonempty lowercase_snake; throws otherwise.
  static AnomalyLabel custom(const std::string& name);

  // Maps a snake_case name back to a label; unknown names become custom.
  static AnomalyLabel from_name(const std::string& name);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_benign() const { return kind_ == Kind::benign; }

  friend bool operator==(const AnomalyLabel& a, const AnomalyLabel& b) {
    return a.name_ == b.name_;
  }
  friend bool operator!=(const AnomalyLabel& a, const AnomalyLabel& b) {
    return !(a == b);
  }
  friend bool operator<(const AnomalyLabel& a, const AnomalyLabel& b) {
    return a.name_ < b.name_;
  }

 private:
  AnomalyLabel(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  Kind kind_;
  std::string name_;
};

// All tunable decision thresholds in one bundle.
//   tau1     Stage-I confidence gate, in [0,1]
//   tau2     Stage-II reconstruction-error gate, > 0 (per-pixel MSE units)
//   tau_c    semantic cosine acceptance, in [-1,1]
//   tau_h    entropy health floor, nats, >= 0
//   tau_s    severity alert gate, in [0,1]
//   lambda1, lambda2  severity fusion weights, sum to 1
struct Thresholds {
  double tau1 = 0.45;
  double tau2 = 1.5e-3;
  double tau_c = 0.54;
  double tau_h = 2.3;
  double tau_s = 0.75;
  double lambda1 = 0.4;
  double lambda2 = 0.6;

  bool operator==(const Thresholds&) const = default;
};

// Returns t unchanged when every invariant holds; throws
// Errc::bound_violation naming the field, or Errc::weight_sum_violation
// when lambda1 + lambda2 != 1.
Thresholds validate_thresholds(const Thresholds& t);

// The alternate configuration used by the obstruction walkthrough: coarser
// Stage-I/II gates on an aggregate error scale.
Thresholds case_study_thresholds();

// Cascade stages, named by what each one does.
enum class Stage {
  object_detection = 1,
  reconstruction = 2,
  semantic = 3,
};

// "I", "II", "III"
const char* stage_numeral(Stage s);

// Outcome of one executed stage. For object_detection and semantic stages
// confidence is in [0,1]; for reconstruction it is the raw error value.
struct StageVerdict {
  Stage stage = Stage::object_detection;
  double confidence = 0.0;
  AnomalyLabel label;
  bool exited = false;
  double elapsed = 0.0;  // simulated seconds
  std::string detail;

  bool operator==(const StageVerdict&) const = default;
};

struct FrameRef {
  std::string camera_id;
  std::int64_t stream_time = 0;

  bool operator==(const FrameRef&) const = default;
  friend bool operator<(const FrameRef& a, const FrameRef& b) {
    if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
    return a.stream_time < b.stream_time;
  }
};

// Full routing record for one frame pushed through the cascade.
struct CascadeResult {
  FrameRef frame_ref;
  std::vector<StageVerdict> verdicts;  // stage order, no gaps, length 1-3
  AnomalyLabel final_label;
  Stage exit_stage = Stage::object_detection;
  double total_latency = 0.0;
  bool forced = false;  // alarm context drove evaluation to the semantic stage

  bool operator==(const CascadeResult&) const = default;
};

// --- Serialization ----------------------------------------------------------

void to_json(nlohmann::json& j, const Frame& f);
void from_json(const nlohmann::json& j, Frame& f);
void to_json(nlohmann::json& j, const AnomalyLabel& l);
void from_json(const nlohmann::json& j, AnomalyLabel& l);
void to_json(nlohmann::json& j, const Thresholds& t);
void from_json(const nlohmann::json& j, Thresholds& t);
void to_json(nlohmann::json& j, const StageVerdict& v);
void from_json(const nlohmann::json& j, StageVerdict& v);
void to_json(nlohmann::json& j, const CascadeResult& r);
void from_json(const nlohmann::json& j, CascadeResult& r);

// Binary PNM import: P5 (grayscale) and P6 (color), maxval 255, intensities
// mapped to [0,1] by v/255. camera_id and stream_time are caller-supplied.
Frame read_pnm(std::istream& in, const std::string& camera_id,
               std::int64_t stream_time);
Frame read_pnm_file(const std::string& path, const std::string& camera_id,
                    std::int64_t stream_time);

}  // namespace sentinel

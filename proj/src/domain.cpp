#include "sentinel/domain.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace sentinel {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::bound_violation: return "BoundViolation";
    case Errc::weight_sum_violation: return "WeightSumViolation";
    case Errc::unknown_topic: return "UnknownTopic";
    case Errc::duplicate_subscriber: return "DuplicateSubscriber";
    case Errc::payload_mismatch: return "PayloadMismatch";
    case Errc::lag_overflow: return "LagOverflow";
    case Errc::degenerate_frame: return "DegenerateFrame";
    case Errc::stream_unavailable: return "StreamUnavailable";
    case Errc::unknown_camera: return "UnknownCamera";
    case Errc::shape_not_divisible: return "ShapeNotDivisible";
    case Errc::backend_failure: return "BackendFailure";
    case Errc::unknown_scenario_class: return "UnknownScenarioClass";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_class: return "EmptyClass";
    case Errc::zero_mean: return "ZeroMean";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::unsorted_input: return "UnsortedInput";
    case Errc::empty_run: return "EmptyRun";
    case Errc::window_too_large: return "WindowTooLarge";
    case Errc::io_failure: return "IoFailure";
    case Errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

void Frame::validate() const {
  if (width < 8 || height < 8) {
    raise(Errc::bound_violation, "frame dimensions must be >= 8, got " +
                                     std::to_string(width) + "x" +
                                     std::to_string(height));
  }
  if (channels != 1 && channels != 3) {
    raise(Errc::bound_violation,
          "channels must be 1 or 3, got " + std::to_string(channels));
  }
  const std::size_t expected = static_cast<std::size_t>(width) * height * channels;
  if (pixels.size() != expected) {
    raise(Errc::bound_violation,
          "pixel buffer length " + std::to_string(pixels.size()) +
              " != width*height*channels = " + std::to_string(expected));
  }
  for (float v : pixels) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      raise(Errc::bound_violation, "pixel intensity outside [0,1]");
    }
  }
}

namespace {

const char* builtin_name(AnomalyLabel::Kind k) {
  switch (k) {
    case AnomalyLabel::Kind::obstructed_view: return "obstructed_view";
    case AnomalyLabel::Kind::person_detected: return "person_detected";
    case AnomalyLabel::Kind::camera_blocked: return "camera_blocked";
    case AnomalyLabel::Kind::suspicious_behavior: return "suspicious_behavior";
    case AnomalyLabel::Kind::frozen_stream: return "frozen_stream";
    case AnomalyLabel::Kind::illumination_shift: return "illumination_shift";
    case AnomalyLabel::Kind::benign: return "benign";
    case AnomalyLabel::Kind::custom: return "";
  }
  return "";
}

bool is_lower_snake(const std::string& s) {
  if (s.empty()) return false;
  if (!std::islower(static_cast<unsigned char>(s.front()))) return false;
  for (char c : s) {
    const bool ok = std::islower(static_cast<unsigned char>(c)) ||
                    std::isdigit(static_cast<unsigned char>(c)) || c == '_';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

AnomalyLabel::AnomalyLabel(Kind kind) : kind_(kind), name_(builtin_name(kind)) {
  if (kind == Kind::custom) {
    raise(Errc::bound_violation, "custom labels require a name; use AnomalyLabel::custom");
  }
}

AnomalyLabel AnomalyLabel::custom(const std::string& name) {
  if (!is_lower_snake(name)) {
    raise(Errc::bound_violation,
          "custom label name must be nonempty lowercase_snake: '" + name + "'");
  }
  return AnomalyLabel(Kind::custom, name);
}

AnomalyLabel AnomalyLabel::from_name(const std::string& name) {
  static const std::array<Kind, 7> builtins = {
      Kind::obstructed_view,   Kind::person_detected, Kind::camera_blocked,
      Kind::suspicious_behavior, Kind::frozen_stream,   Kind::illumination_shift,
      Kind::benign};
  for (Kind k : builtins) {
    if (name == builtin_name(k)) return AnomalyLabel(k);
  }
  return custom(name);
}

namespace {

void check_range(double v, double lo, double hi, const char* field) {
  if (!(v >= lo && v <= hi)) {
    raise(Errc::bound_violation, std::string(field) + " = " + std::to_string(v) +
                                     " outside [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "]");
  }
}

}  // namespace

Thresholds validate_thresholds(const Thresholds& t) {
  check_range(t.tau1, 0.0, 1.0, "tau1");
  if (!(t.tau2 > 0.0)) {
    raise(Errc::bound_violation, "tau2 must be > 0, got " + std::to_string(t.tau2));
  }
  check_range(t.tau_c, -1.0, 1.0, "tau_c");
  if (!(t.tau_h >= 0.0)) {
    raise(Errc::bound_violation, "tau_h must be >= 0, got " + std::to_string(t.tau_h));
  }
  check_range(t.tau_s, 0.0, 1.0, "tau_s");
  check_range(t.lambda1, 0.0, 1.0, "lambda1");
  check_range(t.lambda2, 0.0, 1.0, "lambda2");
  if (std::fabs(t.lambda1 + t.lambda2 - 1.0) > 1e-9) {
    raise(Errc::weight_sum_violation,
          "lambda1 + lambda2 = " + std::to_string(t.lambda1 + t.lambda2));
  }
  return t;
}

Thresholds case_study_thresholds() {
  Thresholds t;
  t.tau1 = 0.85;
  t.tau2 = 0.12;
  return t;
}

const char* stage_numeral(Stage s) {
  switch (s) {
    case Stage::object_detection: return "I";
    case Stage::reconstruction: return "II";
    case Stage::semantic: return "III";
  }
  return "?";
}

// --- JSON -------------------------------------------------------------------

void to_json(nlohmann::json& j, const Frame& f) {
  j = nlohmann::json{{"camera_id", f.camera_id},
                     {"stream_time", f.stream_time},
                     {"width", f.width},
                     {"height", f.height},
                     {"channels", f.channels},
                     {"pixels", f.pixels}};
  if (f.seed_tag) {
    j["seed_tag"] = {{"class", f.seed_tag->scenario_class},
                     {"draw_id", f.seed_tag->draw_id}};
  }
}

void from_json(const nlohmann::json& j, Frame& f) {
  j.at("camera_id").get_to(f.camera_id);
  j.at("stream_time").get_to(f.stream_time);
  j.at("width").get_to(f.width);
  j.at("height").get_to(f.height);
  j.at("channels").get_to(f.channels);
  j.at("pixels").get_to(f.pixels);
  if (j.contains("seed_tag")) {
    FrameTag tag;
    j.at("seed_tag").at("class").get_to(tag.scenario_class);
    j.at("seed_tag").at("draw_id").get_to(tag.draw_id);
    f.seed_tag = tag;
  } else {
    f.seed_tag.reset();
  }
}

void to_json(nlohmann::json& j, const AnomalyLabel& l) { j = l.name(); }

void from_json(const nlohmann::json& j, AnomalyLabel& l) {
  l = AnomalyLabel::from_name(j.get<std::string>());
}

void to_json(nlohmann::json& j, const Thresholds& t) {
  j = nlohmann::json{{"tau1", t.tau1},       {"tau2", t.tau2},
                     {"tau_c", t.tau_c},     {"tau_h", t.tau_h},
                     {"tau_s", t.tau_s},     {"lambda1", t.lambda1},
                     {"lambda2", t.lambda2}};
}

void from_json(const nlohmann::json& j, Thresholds& t) {
  Thresholds defaults;
  t.tau1 = j.value("tau1", defaults.tau1);
  t.tau2 = j.value("tau2", defaults.tau2);
  t.tau_c = j.value("tau_c", defaults.tau_c);
  t.tau_h = j.value("tau_h", defaults.tau_h);
  t.tau_s = j.value("tau_s", defaults.tau_s);
  t.lambda1 = j.value("lambda1", defaults.lambda1);
  t.lambda2 = j.value("lambda2", defaults.lambda2);
}

void to_json(nlohmann::json& j, const StageVerdict& v) {
  j = nlohmann::json{{"stage", stage_numeral(v.stage)},
                     {"confidence", v.confidence},
                     {"label", v.label},
                     {"exited", v.exited},
                     {"elapsed", v.elapsed},
                     {"detail", v.detail}};
}

namespace {

Stage stage_from_numeral(const std::string& s) {
  if (s == "I") return Stage::object_detection;
  if (s == "II") return Stage::reconstruction;
  if (s == "III") return Stage::semantic;
  raise(Errc::config_error, "unknown stage numeral '" + s + "'");
}

}  // namespace

void from_json(const nlohmann::json& j, StageVerdict& v) {
  v.stage = stage_from_numeral(j.at("stage").get<std::string>());
  j.at("confidence").get_to(v.confidence);
  j.at("label").get_to(v.label);
  j.at("exited").get_to(v.exited);
  j.at("elapsed").get_to(v.elapsed);
  j.at("detail").get_to(v.detail);
}

void to_json(nlohmann::json& j, const CascadeResult& r) {
  j = nlohmann::json{{"camera_id", r.frame_ref.camera_id},
                     {"stream_time", r.frame_ref.stream_time},
                     {"verdicts", r.verdicts},
                     {"final_label", r.final_label},
                     {"exit_stage", stage_numeral(r.exit_stage)},
                     {"total_latency", r.total_latency},
                     {"forced", r.forced}};
}

void from_json(const nlohmann::json& j, CascadeResult& r) {
  j.at("camera_id").get_to(r.frame_ref.camera_id);
  j.at("stream_time").get_to(r.frame_ref.stream_time);
  j.at("verdicts").get_to(r.verdicts);
  j.at("final_label").get_to(r.final_label);
  r.exit_stage = stage_from_numeral(j.at("exit_stage").get<std::string>());
  j.at("total_latency").get_to(r.total_latency);
  r.forced = j.value("forced", false);
}

// --- PNM --------------------------------------------------------------------

namespace {

// Reads one whitespace-delimited token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return tok;
}

}  // namespace

Frame read_pnm(std::istream& in, const std::string& camera_id,
               std::int64_t stream_time) {
  const std::string magic = pnm_token(in);
  int channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    raise(Errc::io_failure, "unsupported PNM magic '" + magic + "'");
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(pnm_token(in));
    height = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    raise(Errc::io_failure, "malformed PNM header");
  }
  if (maxval != 255) {
    raise(Errc::io_failure, "PNM maxval must be 255, got " + std::to_string(maxval));
  }

  Frame f;
  f.camera_id = camera_id;
  f.stream_time = stream_time;
  f.width = width;
  f.height = height;
  f.channels = channels;
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    raise(Errc::io_failure, "PNM payload truncated");
  }
  f.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.pixels[i] = static_cast<float>(raw[i]) / 255.0f;
  }
  f.validate();
  return f;
}

Frame read_pnm_file(const std::string& path, const std::string& camera_id,
                    std::int64_t stream_time) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(Errc::io_failure, "cannot open '" + path + "'");
  }
  return read_pnm(in, camera_id, stream_time);
}

}  // namespace sentinel

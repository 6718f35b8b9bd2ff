#include "sentinel/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sentinel/rand.hpp"

namespace sentinel::harness {

void Scenario::validate() const {
  if (version != "v1") {
    raise(Errc::config_error, "unsupported scenario version '" + version + "'");
  }
  if (duration_ticks <= 0) {
    raise(Errc::config_error, "duration_ticks must be > 0");
  }
  if (probe_interval_ticks <= 0) {
    raise(Errc::config_error, "probe_interval must be > 0");
  }
  if (alarm_window <= 0) {
    raise(Errc::config_error, "alarm_window must be > 0");
  }
  if (event_gap < 0) {
    raise(Errc::config_error, "event_gap must be >= 0");
  }
  if (cameras.empty()) {
    raise(Errc::config_error, "scenario needs at least one camera");
  }
  for (const auto& cam : cameras) {
    if (cam.id.empty()) raise(Errc::config_error, "camera id must be nonempty");
    if (cam.width < 8 || cam.height < 8) {
      raise(Errc::config_error, "camera '" + cam.id + "' smaller than 8x8");
    }
    if (cam.channels != 1 && cam.channels != 3) {
      raise(Errc::config_error, "camera '" + cam.id + "' channels must be 1 or 3");
    }
  }
  validate_thresholds(thresholds);
  for (const auto& seg : timeline) {
    if (find_camera(seg.camera) == nullptr) {
      raise(Errc::config_error, "segment references unknown camera '" + seg.camera + "'");
    }
    if (seg.start_tick < 0 || seg.end_tick >= duration_ticks ||
        seg.start_tick > seg.end_tick) {
      raise(Errc::config_error, "segment ticks out of range for '" + seg.camera + "'");
    }
    if (seg.cls.empty()) {
      raise(Errc::config_error, "segment class must be nonempty");
    }
  }
  // Segments must not overlap per camera.
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    for (std::size_t j = i + 1; j < timeline.size(); ++j) {
      const Segment& a = timeline[i];
      const Segment& b = timeline[j];
      if (a.camera != b.camera) continue;
      if (a.start_tick <= b.end_tick && b.start_tick <= a.end_tick) {
        raise(Errc::config_error, "overlapping segments on camera '" + a.camera + "'");
      }
    }
  }
  for (const auto& alarm : injected_alarms) {
    if (find_camera(alarm.camera) == nullptr) {
      raise(Errc::config_error, "injected alarm for unknown camera '" + alarm.camera + "'");
    }
    if (alarm.tick < 0 || alarm.tick >= duration_ticks) {
      raise(Errc::config_error, "injected alarm tick out of range");
    }
  }
  if (stage3.kind == StageKind::classifier_semantic && !semantics_doc) {
    raise(Errc::config_error, "classifier stage3 requires a semantics document");
  }
}

const CameraSpec* Scenario::find_camera(const std::string& id) const {
  for (const auto& cam : cameras) {
    if (cam.id == id) return &cam;
  }
  return nullptr;
}

const Segment* Scenario::active_segment(const std::string& camera,
                                        std::int64_t tick) const {
  for (const auto& seg : timeline) {
    if (seg.camera == camera && tick >= seg.start_tick && tick <= seg.end_tick) {
      return &seg;
    }
  }
  return nullptr;
}

std::string Scenario::class_at(const std::string& camera, std::int64_t tick) const {
  const Segment* seg = active_segment(camera, tick);
  return seg ? seg->cls : "normal";
}

AnomalyLabel truth_label_for_class(const std::string& cls) {
  if (cls == "normal") return AnomalyLabel(AnomalyLabel::Kind::benign);
  if (cls == "obstruction") return AnomalyLabel(AnomalyLabel::Kind::obstructed_view);
  if (cls == "noise_burst") return AnomalyLabel(AnomalyLabel::Kind::illumination_shift);
  if (cls == "frozen") return AnomalyLabel(AnomalyLabel::Kind::frozen_stream);
  if (cls == "loiter_alarm") return AnomalyLabel(AnomalyLabel::Kind::suspicious_behavior);
  return AnomalyLabel::custom(cls);
}

// --- JSON --------------------------------------------------------------------

namespace {

cascade::ConfidenceSpec confidence_from_json(const nlohmann::json& j) {
  cascade::ConfidenceSpec spec;
  if (j.contains("fixed")) {
    spec.kind = cascade::ConfidenceSpec::Kind::fixed;
    spec.value = j.at("fixed").get<double>();
  } else if (j.contains("beta")) {
    spec.kind = cascade::ConfidenceSpec::Kind::beta;
    const auto arr = j.at("beta");
    if (!arr.is_array() || arr.size() != 2) {
      raise(Errc::config_error, "confidence beta spec must be [alpha, beta]");
    }
    spec.alpha = arr[0].get<double>();
    spec.beta = arr[1].get<double>();
    if (!(spec.alpha > 0.0) || !(spec.beta > 0.0)) {
      raise(Errc::config_error, "beta parameters must be > 0");
    }
  } else {
    raise(Errc::config_error, "confidence spec needs 'fixed' or 'beta'");
  }
  return spec;
}

nlohmann::json confidence_to_json(const cascade::ConfidenceSpec& spec) {
  if (spec.kind == cascade::ConfidenceSpec::Kind::fixed) {
    return nlohmann::json{{"fixed", spec.value}};
  }
  return nlohmann::json{{"beta", {spec.alpha, spec.beta}}};
}

cascade::LatencySpec latency_from_json(const nlohmann::json& j) {
  cascade::LatencySpec spec;
  if (j.is_number()) {
    spec.nominal = j.get<double>();
  } else {
    spec.nominal = j.value("nominal", 0.0);
    spec.jitter = j.value("jitter", 0.0);
  }
  if (spec.nominal < 0.0 || spec.jitter < 0.0) {
    raise(Errc::config_error, "latencies must be >= 0");
  }
  return spec;
}

cascade::ClassProfile class_profile_from_json(const nlohmann::json& j) {
  cascade::ClassProfile p;
  if (j.contains("confidence")) {
    p.confidence = confidence_from_json(j.at("confidence"));
  }
  if (j.contains("label")) {
    p.label = AnomalyLabel::from_name(j.at("label").get<std::string>());
  }
  p.detail = j.value("detail", std::string());
  return p;
}

nlohmann::json class_profile_to_json(const cascade::ClassProfile& p) {
  return nlohmann::json{{"confidence", confidence_to_json(p.confidence)},
                        {"label", p.label},
                        {"detail", p.detail}};
}

StageKind stage_kind_from_string(const std::string& s) {
  if (s == "synthetic") return StageKind::synthetic;
  if (s == "proxy") return StageKind::proxy;
  if (s == "direct") return StageKind::direct_semantic;
  if (s == "classifier") return StageKind::classifier_semantic;
  raise(Errc::config_error, "unknown stage kind '" + s + "'");
}

const char* stage_kind_name(StageKind k) {
  switch (k) {
    case StageKind::synthetic: return "synthetic";
    case StageKind::proxy: return "proxy";
    case StageKind::direct_semantic: return "direct";
    case StageKind::classifier_semantic: return "classifier";
  }
  return "?";
}

StageConfig stage_config_from_json(const nlohmann::json& j) {
  StageConfig cfg;
  cfg.kind = stage_kind_from_string(j.value("kind", std::string("synthetic")));
  if (j.contains("latency")) {
    cfg.profile.latency = latency_from_json(j.at("latency"));
  }
  cfg.factor = j.value("factor", 4);
  if (j.contains("classes")) {
    for (const auto& [cls, body] : j.at("classes").items()) {
      cfg.profile.classes[cls] = class_profile_from_json(body);
    }
  }
  return cfg;
}

nlohmann::json stage_config_to_json(const StageConfig& cfg) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [cls, p] : cfg.profile.classes) {
    classes[cls] = class_profile_to_json(p);
  }
  nlohmann::json j{{"kind", stage_kind_name(cfg.kind)},
                   {"latency",
                    {{"nominal", cfg.profile.latency.nominal},
                     {"jitter", cfg.profile.latency.jitter}}},
                   {"classes", classes}};
  if (cfg.kind == StageKind::proxy) j["factor"] = cfg.factor;
  return j;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.version = j.value("version", std::string("v1"));
    s.seed = j.value("seed", 0ull);
    s.duration_ticks = j.at("duration_ticks").get<std::int64_t>();
    s.probe_interval_ticks = j.value("probe_interval", std::int64_t{30});
    s.correlation_window_ticks = j.value("correlation_window", std::int64_t{90});
    s.alarm_window = j.value("alarm_window", std::int64_t{4});
    s.event_gap = j.value("event_gap", std::int64_t{0});
    s.route_all_frames = j.value("route_all_frames", true);
    s.ema_enabled = j.value("ema_enabled", true);
    s.bus_retention = j.value("bus_retention", std::size_t{0});
    s.transcript_capacity = j.value("transcript_capacity", std::size_t{100000});
    s.baseline_latency = j.value("baseline_latency", 8.7);
    if (j.contains("thresholds")) {
      j.at("thresholds").get_to(s.thresholds);
    }
    for (const auto& cj : j.at("cameras")) {
      CameraSpec cam;
      cam.id = cj.at("id").get<std::string>();
      cam.width = cj.value("width", 32);
      cam.height = cj.value("height", 32);
      cam.channels = cj.value("channels", 3);
      cam.config_checksum = cj.value("config_checksum", 0ull);
      s.cameras.push_back(std::move(cam));
    }
    if (j.contains("timeline")) {
      for (const auto& sj : j.at("timeline")) {
        Segment seg;
        seg.camera = sj.at("camera").get<std::string>();
        seg.start_tick = sj.at("start").get<std::int64_t>();
        seg.end_tick = sj.at("end").get<std::int64_t>();
        seg.cls = sj.value("class", std::string("normal"));
        if (sj.contains("params")) {
          for (const auto& [k, v] : sj.at("params").items()) {
            seg.params[k] = v.get<double>();
          }
        }
        if (sj.contains("truth_label")) {
          seg.truth_label = sj.at("truth_label").get<std::string>();
        }
        s.timeline.push_back(std::move(seg));
      }
    }
    const nlohmann::json profiles =
        j.value("stage_profiles", nlohmann::json::object());
    if (profiles.contains("stage1")) s.stage1 = stage_config_from_json(profiles.at("stage1"));
    if (profiles.contains("stage2")) s.stage2 = stage_config_from_json(profiles.at("stage2"));
    if (profiles.contains("stage3")) s.stage3 = stage_config_from_json(profiles.at("stage3"));
    if (j.contains("semantics")) {
      s.semantics_doc = semantics::load_bank_document(j.at("semantics"));
    }
    if (j.contains("injected_alarms")) {
      for (const auto& aj : j.at("injected_alarms")) {
        s.injected_alarms.push_back(
            InjectedAlarm{aj.at("camera").get<std::string>(),
                          aj.at("tick").get<std::int64_t>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::config_error, std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json cameras = nlohmann::json::array();
  for (const auto& cam : s.cameras) {
    cameras.push_back({{"id", cam.id},
                       {"width", cam.width},
                       {"height", cam.height},
                       {"channels", cam.channels},
                       {"config_checksum", cam.config_checksum}});
  }
  nlohmann::json timeline = nlohmann::json::array();
  for (const auto& seg : s.timeline) {
    nlohmann::json sj{{"camera", seg.camera},
                      {"start", seg.start_tick},
                      {"end", seg.end_tick},
                      {"class", seg.cls}};
    if (!seg.params.empty()) sj["params"] = seg.params;
    if (seg.truth_label) sj["truth_label"] = *seg.truth_label;
    timeline.push_back(std::move(sj));
  }
  nlohmann::json alarms = nlohmann::json::array();
  for (const auto& alarm : s.injected_alarms) {
    alarms.push_back({{"camera", alarm.camera}, {"tick", alarm.tick}});
  }
  nlohmann::json j{{"version", s.version},
                   {"seed", s.seed},
                   {"duration_ticks", s.duration_ticks},
                   {"probe_interval", s.probe_interval_ticks},
                   {"correlation_window", s.correlation_window_ticks},
                   {"alarm_window", s.alarm_window},
                   {"event_gap", s.event_gap},
                   {"route_all_frames", s.route_all_frames},
                   {"ema_enabled", s.ema_enabled},
                   {"bus_retention", s.bus_retention},
                   {"transcript_capacity", s.transcript_capacity},
                   {"baseline_latency", s.baseline_latency},
                   {"thresholds", s.thresholds},
                   {"cameras", cameras},
                   {"timeline", timeline},
                   {"stage_profiles",
                    {{"stage1", stage_config_to_json(s.stage1)},
                     {"stage2", stage_config_to_json(s.stage2)},
                     {"stage3", stage_config_to_json(s.stage3)}}}};
  if (s.semantics_doc) {
    j["semantics"] = semantics::save_bank_document(*s.semantics_doc);
  }
  if (!alarms.empty()) j["injected_alarms"] = alarms;
  return j;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    raise(Errc::io_failure, "cannot open scenario '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::config_error, std::string("scenario is not valid JSON: ") + e.what());
  }
  return scenario_from_json(j);
}

// --- Stream generation -------------------------------------------------------

namespace {

float clamp_unit(double v) {
  return static_cast<float>(std::min(0.995, std::max(0.005, v)));
}

// Cheap per-pixel hash noise in [-1, 1).
double pixel_noise(std::uint64_t frame_seed, std::size_t index) {
  const std::uint64_t h = rnd::combine(frame_seed, static_cast<std::uint64_t>(index));
  return (static_cast<double>(h >> 11) * 0x1.0p-53) * 2.0 - 1.0;
}

Frame blank_frame(const CameraSpec& cam, const std::string& cls, std::int64_t tick,
                  std::uint64_t camera_seed) {
  Frame f;
  f.camera_id = cam.id;
  f.stream_time = tick;
  f.width = cam.width;
  f.height = cam.height;
  f.channels = cam.channels;
  f.pixels.resize(static_cast<std::size_t>(cam.width) * cam.height * cam.channels);
  f.seed_tag = FrameTag{cls, rnd::combine(camera_seed, static_cast<std::uint64_t>(tick))};
  return f;
}

// Smooth gradient with slow seeded drift. Calibrated so entropy stays well
// above the default tau_h while the factor-4 proxy error stays an order of
// magnitude below tau2.
void fill_gradient(Frame& f, std::uint64_t frame_seed, double base, double ramp,
                   double noise_amp) {
  rnd::Stream stream(frame_seed);
  const double phase = stream.next_unit();
  const double drift = 0.06 * std::sin(2.0 * M_PI * phase);
  const double gx = ramp / f.width;
  const double gy = 0.7 * ramp / f.height;
  std::size_t i = 0;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const double v = base + drift + gx * x + gy * y;
      for (int c = 0; c < f.channels; ++c, ++i) {
        const double chan = v + 0.012 * c + noise_amp * pixel_noise(frame_seed, i);
        f.pixels[i] = clamp_unit(chan);
      }
    }
  }
}

void fill_constant(Frame& f, std::uint64_t frame_seed, double base, double noise_amp) {
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    f.pixels[i] = clamp_unit(base + noise_amp * pixel_noise(frame_seed, i));
  }
}

void fill_white_noise(Frame& f, std::uint64_t frame_seed) {
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    f.pixels[i] = clamp_unit(0.5 + 0.5 * pixel_noise(frame_seed, i));
  }
}

}  // namespace

Frame generate_frame(const CameraSpec& cam, const std::string& cls,
                     std::int64_t tick, std::uint64_t seed,
                     const std::map<std::string, double>& params,
                     std::int64_t frozen_source_tick) {
  const std::uint64_t camera_seed = rnd::combine(seed, cam.id);
  Frame f = blank_frame(cam, cls, tick, camera_seed);
  const std::uint64_t frame_seed =
      rnd::combine(camera_seed, static_cast<std::uint64_t>(tick));

  if (cls == "normal" || cls == "loiter_alarm") {
    // Drift keyed off a coarse tick bucket so consecutive frames stay similar.
    const std::uint64_t drift_seed =
        rnd::combine(camera_seed, static_cast<std::uint64_t>(tick / 600 + 1));
    fill_gradient(f, rnd::combine(drift_seed, frame_seed), 0.38, 0.22, 0.010);
  } else if (cls == "obstruction") {
    fill_constant(f, frame_seed, 0.020, 0.0015);
  } else if (cls == "noise_burst") {
    fill_white_noise(f, frame_seed);
  } else if (cls == "frozen") {
    // Repeat of the last normal frame before the freeze.
    Frame src = generate_frame(cam, "normal", frozen_source_tick, seed);
    f.pixels = std::move(src.pixels);
  } else {
    if (params.empty()) {
      raise(Errc::unknown_scenario_class,
            "no pixel recipe for class '" + cls + "' and no params");
    }
    auto get = [&](const char* key, double fallback) {
      auto it = params.find(key);
      return it == params.end() ? fallback : it->second;
    };
    fill_gradient(f, frame_seed, get("base", 0.5), get("ramp", 0.1),
                  get("noise", 0.02));
  }
  return f;
}

std::vector<Frame> generate_stream(const CameraSpec& cam, const std::string& cls,
                                   std::int64_t start_tick, std::int64_t end_tick,
                                   std::uint64_t seed,
                                   const std::map<std::string, double>& params) {
  std::vector<Frame> frames;
  const std::int64_t frozen_src = std::max<std::int64_t>(0, start_tick - 1);
  for (std::int64_t t = start_tick; t <= end_tick; ++t) {
    frames.push_back(generate_frame(cam, cls, t, seed, params, frozen_src));
  }
  return frames;
}

void SweepSpec::validate() const {
  if (parameter != "tau1" && parameter != "tau2" && parameter != "tau_c") {
    raise(Errc::config_error, "sweep parameter must be tau1|tau2|tau_c");
  }
  if (values.empty()) {
    raise(Errc::config_error, "sweep needs at least one value");
  }
  if (!std::is_sorted(values.begin(), values.end())) {
    raise(Errc::config_error, "sweep values must be ascending");
  }
  for (const auto& m : metrics) {
    if (m != metric_names::kEarlyExitPct && m != metric_names::kMacroF1Proxy &&
        m != metric_names::kMeanLatency && m != metric_names::kAcceptedFraction) {
      raise(Errc::config_error, "unknown sweep metric '" + m + "'");
    }
  }
}

}  // namespace sentinel::harness

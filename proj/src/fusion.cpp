#include "sentinel/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace sentinel::fusion {

SeverityResult severity(const SeverityInput& input, const Thresholds& t) {
  if (!(input.conf_visual >= 0.0 && input.conf_visual <= 1.0) ||
      !(input.conf_contextual >= 0.0 && input.conf_contextual <= 1.0)) {
    raise(Errc::bound_violation, "severity inputs must be in [0,1]");
  }
  SeverityResult r;
  r.score = t.lambda1 * input.conf_visual + t.lambda2 * input.conf_contextual;
  r.alert = r.score >= t.tau_s;
  return r;
}

namespace {

// Confidence of the verdict a result exited on.
double exit_confidence(const CascadeResult& r) {
  return r.verdicts.back().confidence;
}

// e(x) when the reconstruction stage ran, else nothing.
const StageVerdict* reconstruction_verdict(const CascadeResult& r) {
  for (const auto& v : r.verdicts) {
    if (v.stage == Stage::reconstruction) return &v;
  }
  return nullptr;
}

}  // namespace

std::vector<Event> merge_events(const std::vector<CascadeResult>& verdicts,
                                std::int64_t gap) {
  for (std::size_t i = 1; i < verdicts.size(); ++i) {
    const FrameRef& a = verdicts[i - 1].frame_ref;
    const FrameRef& b = verdicts[i].frame_ref;
    if (b < a) {
      raise(Errc::unsorted_input,
            "verdicts must be sorted by (camera_id, stream_time)");
    }
  }

  // Same-label runs merge independently per (camera, label) stream; a gap of
  // <= `gap` intervening ticks (of anything) does not split a run.
  struct Open {
    Event event;
    double conf_sum = 0.0;
    double err_sum = 0.0;
  };
  std::map<std::pair<std::string, AnomalyLabel>, Open> open;
  std::vector<Event> done;

  auto close = [&](Open& o) {
    o.event.mean_confidence = o.conf_sum / static_cast<double>(o.event.frame_count);
    if (o.event.error_stats.samples > 0) {
      o.event.error_stats.mean =
          o.err_sum / static_cast<double>(o.event.error_stats.samples);
    }
    done.push_back(o.event);
  };

  for (const auto& r : verdicts) {
    if (r.final_label.is_benign()) continue;
    const auto key = std::make_pair(r.frame_ref.camera_id, r.final_label);
    const std::int64_t tick = r.frame_ref.stream_time;
    auto it = open.find(key);
    if (it != open.end() && tick - it->second.event.end_frame - 1 > gap) {
      close(it->second);
      open.erase(it);
      it = open.end();
    }
    if (it == open.end()) {
      Open o;
      o.event.label = r.final_label;
      o.event.camera_id = r.frame_ref.camera_id;
      o.event.source = r.frame_ref.camera_id;
      o.event.start_frame = tick;
      o.event.end_frame = tick;
      it = open.emplace(key, std::move(o)).first;
    }
    Open& o = it->second;
    o.event.end_frame = tick;
    o.event.frame_count += 1;
    o.conf_sum += exit_confidence(r);
    if (const StageVerdict* rv = reconstruction_verdict(r)) {
      const double e = rv->confidence;
      auto& stats = o.event.error_stats;
      if (stats.samples == 0) {
        stats.min = stats.max = e;
      } else {
        stats.min = std::min(stats.min, e);
        stats.max = std::max(stats.max, e);
      }
      stats.samples += 1;
      o.err_sum += e;
    }
  }
  for (auto& [key, o] : open) close(o);

  std::sort(done.begin(), done.end(), [](const Event& a, const Event& b) {
    if (a.camera_id != b.camera_id) return a.camera_id < b.camera_id;
    if (a.start_frame != b.start_frame) return a.start_frame < b.start_frame;
    return a.label < b.label;
  });
  return done;
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double psnr(const cascade::ReconstructionPair& pair) {
  return psnr_from_mse(cascade::reconstruction_error(pair));
}

double ssim(const cascade::ReconstructionPair& pair, int window) {
  pair.validate();
  const Frame& x = pair.original;
  const Frame& y = pair.reconstruction;
  if (window < 1 || window > std::min(x.width, x.height)) {
    raise(Errc::window_too_large, "window " + std::to_string(window) +
                                      " exceeds frame " + std::to_string(x.width) +
                                      "x" + std::to_string(x.height));
  }
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;

  double channel_sum = 0.0;
  for (int c = 0; c < x.channels; ++c) {
    double tile_sum = 0.0;
    std::size_t tiles = 0;
    for (int y0 = 0; y0 < x.height; y0 += window) {
      for (int x0 = 0; x0 < x.width; x0 += window) {
        const int h = std::min(window, x.height - y0);
        const int w = std::min(window, x.width - x0);
        const double n = static_cast<double>(h) * w;
        double sx = 0.0, sy = 0.0;
        for (int yy = y0; yy < y0 + h; ++yy) {
          for (int xx = x0; xx < x0 + w; ++xx) {
            sx += x.at(xx, yy, c);
            sy += y.at(xx, yy, c);
          }
        }
        const double mx = sx / n;
        const double my = sy / n;
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (int yy = y0; yy < y0 + h; ++yy) {
          for (int xx = x0; xx < x0 + w; ++xx) {
            const double dx = x.at(xx, yy, c) - mx;
            const double dy = y.at(xx, yy, c) - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
          }
        }
        vx /= n;
        vy /= n;
        cov /= n;
        const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
        const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
        tile_sum += num / den;
        ++tiles;
      }
    }
    channel_sum += tile_sum / static_cast<double>(tiles);
  }
  return channel_sum / static_cast<double>(x.channels);
}

double mae(const cascade::ReconstructionPair& pair) {
  pair.validate();
  const auto& a = pair.original.pixels;
  const auto& b = pair.reconstruction.pixels;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return sum / static_cast<double>(a.size());
}

RunMetrics accounting(const std::vector<CascadeResult>& results,
                      const StageLatencies& latencies, double baseline) {
  if (results.empty()) {
    raise(Errc::empty_run, "accounting requires at least one result");
  }
  RunMetrics m;
  m.frames_total = results.size();
  double latency_sum = 0.0;
  for (const auto& r : results) {
    m.exits_by_stage[static_cast<int>(r.exit_stage) - 1] += 1;
    latency_sum += r.total_latency;
  }
  const double n = static_cast<double>(m.frames_total);
  for (int i = 0; i < 3; ++i) {
    m.exit_fractions[i] = static_cast<double>(m.exits_by_stage[i]) / n;
  }
  m.mean_latency = latency_sum / n;
  const double l1 = latencies.object_detection;
  const double l2 = latencies.reconstruction;
  const double l3 = latencies.semantic;
  m.closed_form_latency = m.exit_fractions[0] * l1 +
                          m.exit_fractions[1] * (l1 + l2) +
                          m.exit_fractions[2] * (l1 + l2 + l3);
  m.baseline_latency = baseline;
  m.speedup_ratio = m.mean_latency > 0.0 ? baseline / m.mean_latency : 0.0;
  return m;
}

void to_json(nlohmann::json& j, const Event& e) {
  j = nlohmann::json{{"label", e.label},
                     {"camera", e.camera_id},
                     {"start", e.start_frame},
                     {"end", e.end_frame},
                     {"frames", e.frame_count},
                     {"conf_mean", e.mean_confidence},
                     {"source", e.source}};
  if (e.error_stats.samples > 0) {
    j["err_min"] = e.error_stats.min;
    j["err_mean"] = e.error_stats.mean;
    j["err_max"] = e.error_stats.max;
  } else {
    j["err_min"] = nullptr;
    j["err_mean"] = nullptr;
    j["err_max"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, Event& e) {
  j.at("label").get_to(e.label);
  j.at("camera").get_to(e.camera_id);
  j.at("start").get_to(e.start_frame);
  j.at("end").get_to(e.end_frame);
  j.at("frames").get_to(e.frame_count);
  j.at("conf_mean").get_to(e.mean_confidence);
  j.at("source").get_to(e.source);
  if (j.contains("err_min") && !j.at("err_min").is_null()) {
    e.error_stats.min = j.at("err_min").get<double>();
    e.error_stats.mean = j.at("err_mean").get<double>();
    e.error_stats.max = j.at("err_max").get<double>();
    e.error_stats.samples = 1;  // presence marker; sample count is not exported
  } else {
    e.error_stats = ErrorStats{};
  }
}

void to_json(nlohmann::json& j, const RunMetrics& m) {
  j = nlohmann::json{{"frames_total", m.frames_total},
                     {"exits_by_stage",
                      {{"I", m.exits_by_stage[0]},
                       {"II", m.exits_by_stage[1]},
                       {"III", m.exits_by_stage[2]}}},
                     {"exit_fractions", m.exit_fractions},
                     {"mean_latency", m.mean_latency},
                     {"closed_form_latency", m.closed_form_latency},
                     {"baseline_latency", m.baseline_latency},
                     {"speedup_ratio", m.speedup_ratio},
                     {"events_total", m.events_total}};
}

void from_json(const nlohmann::json& j, RunMetrics& m) {
  j.at("frames_total").get_to(m.frames_total);
  m.exits_by_stage[0] = j.at("exits_by_stage").at("I").get<std::size_t>();
  m.exits_by_stage[1] = j.at("exits_by_stage").at("II").get<std::size_t>();
  m.exits_by_stage[2] = j.at("exits_by_stage").at("III").get<std::size_t>();
  j.at("exit_fractions").get_to(m.exit_fractions);
  j.at("mean_latency").get_to(m.mean_latency);
  j.at("closed_form_latency").get_to(m.closed_form_latency);
  j.at("baseline_latency").get_to(m.baseline_latency);
  j.at("speedup_ratio").get_to(m.speedup_ratio);
  j.at("events_total").get_to(m.events_total);
}

}  // namespace sentinel::fusion

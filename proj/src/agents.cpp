#include "sentinel/agents.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sentinel::agents {

void CameraRegistry::validate() const {
  if (!(probe_interval > 0.0)) {
    raise(Errc::bound_violation, "probe_interval must be > 0");
  }
  std::set<std::string> seen;
  for (const auto& cam : cameras) {
    if (!seen.insert(cam.camera_id).second) {
      raise(Errc::bound_violation, "duplicate camera id '" + cam.camera_id + "'");
    }
  }
}

const CameraInfo* CameraRegistry::find(const std::string& camera_id) const {
  for (const auto& cam : cameras) {
    if (cam.camera_id == camera_id) return &cam;
  }
  return nullptr;
}

double shannon_entropy(const Frame& frame, int bins) {
  if (bins < 2) {
    raise(Errc::bound_violation, "bins must be >= 2, got " + std::to_string(bins));
  }
  if (frame.pixels.empty()) {
    raise(Errc::degenerate_frame, "frame has no pixels");
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (float v : frame.pixels) {
    int idx = static_cast<int>(static_cast<double>(v) * bins);
    if (idx >= bins) idx = bins - 1;  // v == 1.0 lands in the top bin
    if (idx < 0) idx = 0;
    counts[static_cast<std::size_t>(idx)] += 1;
  }
  const double total = static_cast<double>(frame.pixels.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

std::vector<HealthStatus> cyclical_probe(const CameraRegistry& registry,
                                         const StreamSource& source,
                                         const Thresholds& t, bus::Broker& broker,
                                         double now) {
  registry.validate();
  if (registry.cameras.empty()) {
    raise(Errc::bound_violation, "probe sweep over empty registry");
  }
  std::vector<HealthStatus> statuses;
  statuses.reserve(registry.cameras.size());
  for (const auto& cam : registry.cameras) {
    HealthStatus status;
    status.camera_id = cam.camera_id;
    status.probed_at = now;

    const auto stamped = source.latest(cam.camera_id);
    if (stamped) {
      status.stream_live = (now - stamped->captured_at) < 2.0 * registry.probe_interval;
      status.entropy = shannon_entropy(stamped->frame);
      status.entropy_ok = status.entropy >= t.tau_h;
      status.config_ok = source.config_checksum(cam.camera_id) == cam.config_checksum;
    }
    // One report per camera per sweep, faults included.
    broker.publish(bus::topics::kHealth,
                   bus::ProbeReport{cam.camera_id, status.entropy, status.healthy()},
                   now);
    if (stamped && !status.entropy_ok) {
      // Low entropy suggests obstruction: route the frame into the cascade.
      broker.publish(bus::topics::kTasks, bus::FrameTask{stamped->frame, false}, now);
    }
    statuses.push_back(status);
  }
  return statuses;
}

std::size_t event_agent_on_alarm(const bus::AlarmSignal& alarm,
                                 const CameraRegistry& registry,
                                 const StreamSource& source, bus::Broker& broker,
                                 double now, std::size_t window) {
  if (registry.find(alarm.camera_id) == nullptr) {
    raise(Errc::unknown_camera, "alarm for unregistered camera '" +
                                    alarm.camera_id + "'");
  }
  const std::vector<Frame> frames = source.recent(alarm.camera_id, window);
  for (const Frame& f : frames) {
    broker.publish(bus::topics::kTasks, bus::FrameTask{f, true}, now);
  }
  return frames.size();
}

std::size_t EventAgent::poll_and_handle(double now) {
  std::size_t published = 0;
  for (;;) {
    const auto envelopes = broker_.poll(alerts_, 64);
    if (envelopes.empty()) break;
    for (const auto& env : envelopes) {
      const auto& alarm = std::get<bus::AlarmSignal>(env.payload);
      published +=
          event_agent_on_alarm(alarm, registry_, source_, broker_, now, window_);
    }
  }
  return published;
}

}  // namespace sentinel::agents

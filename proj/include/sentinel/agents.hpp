#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/bus.hpp"
#include "sentinel/domain.hpp"

// The two coordinating agents. The cyclical monitor sweeps every camera at a
// fixed interval: entropy probe, liveness check, config checksum. The event
// agent reacts to alarm signals by routing the most recent frames of the
// alarmed camera into the cascade with forced semantic escalation.

namespace sentinel::agents {

struct CameraInfo {
  std::string camera_id;
  std::uint64_t config_checksum = 0;
};

struct CameraRegistry {
  std::vector<CameraInfo> cameras;
  double probe_interval = 1.0;  // simulated seconds between sweeps

  void validate() const;
  const CameraInfo* find(const std::string& camera_id) const;
};

struct StampedFrame {
  Frame frame;
  double captured_at = 0.0;
};

// Read-side view of the camera streams. latest() returning nullopt marks the
// stream unavailable; the sweep records it and moves on.
class StreamSource {
 public:
  virtual ~StreamSource() = default;
  virtual std::optional<StampedFrame> latest(const std::string& camera_id) const = 0;
  virtual std::vector<Frame> recent(const std::string& camera_id,
                                    std::size_t n) const = 0;
  virtual std::uint64_t config_checksum(const std::string& camera_id) const = 0;
};

struct HealthStatus {
  std::string camera_id;
  double entropy = 0.0;  // nats
  bool entropy_ok = false;
  bool stream_live = false;
  bool config_ok = false;
  double probed_at = 0.0;

  bool healthy() const { return entropy_ok && stream_live && config_ok; }
};

// Histogram entropy of frame intensities over `bins` equal-width buckets on
// [0,1], all channels pooled, in nats: -sum p_i ln p_i with 0 ln 0 := 0.
// Bounded by ln(bins). Throws Errc::bound_violation when bins < 2 and
// Errc::degenerate_frame on an empty pixel buffer.
double shannon_entropy(const Frame& frame, int bins = 256);

// One monitoring sweep. Publishes exactly one ProbeReport per registered
// camera on "health" regardless of faults; a camera whose entropy falls
// below tau_h additionally routes its latest frame to "tasks". Liveness
// means the latest frame is younger than two probe intervals.
std::vector<HealthStatus> cyclical_probe(const CameraRegistry& registry,
                                         const StreamSource& source,
                                         const Thresholds& t, bus::Broker& broker,
                                         double now);

// Alarm response: publish the `window` most recent frames of the alarmed
// camera as FrameTasks with escalate_semantics = true. Returns the number of
// tasks published. Throws Errc::unknown_camera.
std::size_t event_agent_on_alarm(const bus::AlarmSignal& alarm,
                                 const CameraRegistry& registry,
                                 const StreamSource& source, bus::Broker& broker,
                                 double now, std::size_t window = 4);

// Thin stateful wrappers used by the scenario driver.

class CyclicalMonitor {
 public:
  CyclicalMonitor(bus::Broker& broker, CameraRegistry registry,
                  const StreamSource& source, Thresholds thresholds)
      : broker_(broker),
        registry_(std::move(registry)),
        source_(source),
        thresholds_(thresholds) {
    registry_.validate();
  }

  std::vector<HealthStatus> run_sweep(double now) {
    return cyclical_probe(registry_, source_, thresholds_, broker_, now);
  }

  const CameraRegistry& registry() const { return registry_; }

 private:
  bus::Broker& broker_;
  CameraRegistry registry_;
  const StreamSource& source_;
  Thresholds thresholds_;
};

class EventAgent {
 public:
  EventAgent(bus::Broker& broker, CameraRegistry registry,
             const StreamSource& source, std::size_t window = 4)
      : broker_(broker),
        registry_(std::move(registry)),
        source_(source),
        window_(window),
        alerts_(broker.subscribe(bus::topics::kAlerts, "event_agent")) {
    registry_.validate();
  }

  // Drains pending alarms; returns the number of frame tasks published.
  std::size_t poll_and_handle(double now);

 private:
  bus::Broker& broker_;
  CameraRegistry registry_;
  const StreamSource& source_;
  std::size_t window_;
  bus::Subscription alerts_;
};

}  // namespace sentinel::agents

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "sentinel/domain.hpp"
#include "sentinel/fusion.hpp"

// In-process topic-based publish/subscribe broker with ordered, lossless
// per-topic delivery. Delivery is pull-based (poll) so agent scheduling stays
// deterministic under the simulated clock. Subscribers see no pre-subscription
// history. With bounded retention, a consumer that lags past the ring gets
// LagOverflow instead of silent loss.

namespace sentinel::bus {

struct AlarmSignal {
  std::string camera_id;
  double alarm_time = 0.0;
};

struct ProbeReport {
  std::string camera_id;
  double entropy = 0.0;
  bool healthy = true;
};

struct FrameTask {
  Frame frame;
  bool escalate_semantics = false;
};

struct VerdictMsg {
  CascadeResult result;
};

struct EventNotice {
  fusion::Event event;
};

struct SeverityAlert {
  std::string visual_camera;
  std::string contextual_camera;
  double conf_visual = 0.0;
  double conf_contextual = 0.0;
  double score = 0.0;
  bool alert = false;
};

using Payload = std::variant<AlarmSignal, ProbeReport, FrameTask, VerdictMsg,
                             EventNotice, SeverityAlert>;

enum class PayloadKind {
  alarm,
  probe_report,
  frame_task,
  verdict,
  event_notice,
  severity_alert,
};

PayloadKind kind_of(const Payload& p);
const char* payload_kind_name(PayloadKind k);

struct Envelope {
  std::string topic;
  std::uint64_t seq = 0;  // strictly increasing per topic, starts at 1
  Payload payload;
  double published_at = 0.0;  // simulated clock seconds
};

struct Subscription {
  std::string topic;
  std::string subscriber_id;
  std::uint64_t cursor = 0;  // last consumed seq
};

// Conventional topic names wired through the whole pipeline.
namespace topics {
inline constexpr const char* kAlerts = "alerts";
inline constexpr const char* kHealth = "health";
inline constexpr const char* kTasks = "tasks";
inline constexpr const char* kVerdicts = "verdicts";
inline constexpr const char* kEvents = "events";
inline constexpr const char* kSeverity = "severity";
}  // namespace topics

class Broker {
 public:
  // retention = 0 keeps every envelope; otherwise each topic keeps a ring of
  // the most recent `retention` envelopes.
  explicit Broker(std::size_t retention = 0) : retention_(retention) {}

  void register_topic(const std::string& name, PayloadKind kind);
  bool has_topic(const std::string& name) const;

  // Registers alerts/health/tasks/verdicts/events/severity with their types.
  void register_standard_topics();

  // Appends an envelope with seq = previous max + 1. Throws UnknownTopic and
  // PayloadMismatch.
  std::uint64_t publish(const std::string& topic, Payload payload,
                        double published_at = 0.0);

  // Cursor starts at the current max seq: no replay of history. Throws
  // UnknownTopic and DuplicateSubscriber.
  Subscription subscribe(const std::string& topic, const std::string& subscriber_id);

  // Up to max_n envelopes with seq > cursor, in order; advances the cursor
  // past the last one returned. Empty when caught up. Throws LagOverflow when
  // retention has dropped envelopes the cursor still needs.
  std::vector<Envelope> poll(Subscription& sub, std::size_t max_n);

  std::uint64_t max_seq(const std::string& topic) const;

  // Observer invoked for every publish, under the broker lock, in global
  // publish order. Used for transcripts.
  void set_tap(std::function<void(const Envelope&)> tap);

 private:
  struct Topic {
    PayloadKind kind;
    std::uint64_t next_seq = 1;
    std::uint64_t base_seq = 1;  // seq of the oldest retained envelope
    std::deque<Envelope> log;
    std::set<std::string> subscribers;
  };

  mutable std::mutex mu_;
  std::map<std::string, Topic> topics_;
  std::size_t retention_;
  std::function<void(const Envelope&)> tap_;
};

}  // namespace sentinel::bus

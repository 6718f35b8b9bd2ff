#include "sentinel/bus.hpp"

#include <algorithm>

namespace sentinel::bus {

PayloadKind kind_of(const Payload& p) {
  return static_cast<PayloadKind>(p.index());
}

const char* payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::alarm: return "alarm";
    case PayloadKind::probe_report: return "probe_report";
    case PayloadKind::frame_task: return "frame_task";
    case PayloadKind::verdict: return "verdict";
    case PayloadKind::event_notice: return "event_notice";
    case PayloadKind::severity_alert: return "severity_alert";
  }
  return "?";
}

void Broker::register_topic(const std::string& name, PayloadKind kind) {
  std::lock_guard<std::mutex> lock(mu_);
  topics_.emplace(name, Topic{kind, 1, 1, {}, {}});
}

bool Broker::has_topic(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  return topics_.count(name) > 0;
}

void Broker::register_standard_topics() {
  register_topic(topics::kAlerts, PayloadKind::alarm);
  register_topic(topics::kHealth, PayloadKind::probe_report);
  register_topic(topics::kTasks, PayloadKind::frame_task);
  register_topic(topics::kVerdicts, PayloadKind::verdict);
  register_topic(topics::kEvents, PayloadKind::event_notice);
  register_topic(topics::kSeverity, PayloadKind::severity_alert);
}

std::uint64_t Broker::publish(const std::string& topic, Payload payload,
                              double published_at) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) {
    raise(Errc::unknown_topic, "publish to unregistered topic '" + topic + "'");
  }
  Topic& t = it->second;
  if (kind_of(payload) != t.kind) {
    raise(Errc::payload_mismatch,
          "topic '" + topic + "' carries " + payload_kind_name(t.kind) +
              ", got " + payload_kind_name(kind_of(payload)));
  }
  const std::uint64_t seq = t.next_seq++;
  t.log.push_back(Envelope{topic, seq, std::move(payload), published_at});
  if (retention_ > 0 && t.log.size() > retention_) {
    t.log.pop_front();
    t.base_seq = t.log.front().seq;
  }
  if (tap_) tap_(t.log.back());
  return seq;
}

Subscription Broker::subscribe(const std::string& topic,
                               const std::string& subscriber_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) {
    raise(Errc::unknown_topic, "subscribe to unregistered topic '" + topic + "'");
  }
  Topic& t = it->second;
  if (!t.subscribers.insert(subscriber_id).second) {
    raise(Errc::duplicate_subscriber,
          "'" + subscriber_id + "' already subscribed to '" + topic + "'");
  }
  return Subscription{topic, subscriber_id, t.next_seq - 1};
}

std::vector<Envelope> Broker::poll(Subscription& sub, std::size_t max_n) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(sub.topic);
  if (it == topics_.end()) {
    raise(Errc::unknown_topic, "poll on unregistered topic '" + sub.topic + "'");
  }
  const Topic& t = it->second;
  std::vector<Envelope> out;
  if (max_n == 0) return out;
  if (sub.cursor + 1 < t.base_seq) {
    raise(Errc::lag_overflow,
          "subscriber '" + sub.subscriber_id + "' lagged past retention on '" +
              sub.topic + "'");
  }
  // log is contiguous in seq, so the next envelope sits at a fixed offset.
  const std::uint64_t first_wanted = sub.cursor + 1;
  if (first_wanted >= t.next_seq) return out;
  std::size_t idx = static_cast<std::size_t>(first_wanted - t.base_seq);
  for (; idx < t.log.size() && out.size() < max_n; ++idx) {
    out.push_back(t.log[idx]);
  }
  if (!out.empty()) sub.cursor = out.back().seq;
  return out;
}

std::uint64_t Broker::max_seq(const std::string& topic) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = topics_.find(topic);
  if (it == topics_.end()) {
    raise(Errc::unknown_topic, "max_seq on unregistered topic '" + topic + "'");
  }
  return it->second.next_seq - 1;
}

void Broker::set_tap(std::function<void(const Envelope&)> tap) {
  std::lock_guard<std::mutex> lock(mu_);
  tap_ = std::move(tap);
}

}  // namespace sentinel::bus

#include <algorithm>
#include <bit>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <unordered_map>

#include "sentinel/rand.hpp"
#include "sentinel/scenario.hpp"

// The scenario driver owns the simulated clock and advances it one tick at a
// time. Within a tick the order is fixed: generate frames, inject alarms,
// cyclical probe, event-agent alarm handling, ingest routing, worker drain,
// severity correlation. Everything downstream of the seed is deterministic.

namespace sentinel::harness {

namespace {

std::uint64_t fold_double(double v, std::uint64_t h) {
  return rnd::fnv1a_u64(std::bit_cast<std::uint64_t>(v), h);
}

std::uint64_t fold_frame(const Frame& f, std::uint64_t h) {
  h = rnd::fnv1a(f.camera_id, h);
  h = rnd::fnv1a_u64(static_cast<std::uint64_t>(f.stream_time), h);
  h = rnd::fnv1a_u64(static_cast<std::uint64_t>(f.width), h);
  h = rnd::fnv1a_u64(static_cast<std::uint64_t>(f.height), h);
  h = rnd::fnv1a_u64(static_cast<std::uint64_t>(f.channels), h);
  for (float px : f.pixels) {
    h = rnd::fnv1a_u64(std::bit_cast<std::uint32_t>(px), h);
  }
  if (f.seed_tag) {
    h = rnd::fnv1a(f.seed_tag->scenario_class, h);
    h = rnd::fnv1a_u64(f.seed_tag->draw_id, h);
  }
  return h;
}

std::uint64_t fold_result(const CascadeResult& r, std::uint64_t h) {
  h = rnd::fnv1a(r.frame_ref.camera_id, h);
  h = rnd::fnv1a_u64(static_cast<std::uint64_t>(r.frame_ref.stream_time), h);
  h = rnd::fnv1a(stage_numeral(r.exit_stage), h);
  h = rnd::fnv1a(r.final_label.name(), h);
  h = fold_double(r.total_latency, h);
  h = rnd::fnv1a_u64(r.forced ? 1 : 0, h);
  for (const auto& v : r.verdicts) {
    h = rnd::fnv1a(stage_numeral(v.stage), h);
    h = fold_double(v.confidence, h);
    h = rnd::fnv1a(v.label.name(), h);
    h = rnd::fnv1a_u64(v.exited ? 1 : 0, h);
    h = fold_double(v.elapsed, h);
    h = rnd::fnv1a(v.detail, h);
  }
  return h;
}

std::uint64_t fold_envelope(const bus::Envelope& env, std::uint64_t h) {
  h = rnd::fnv1a(env.topic, h);
  h = rnd::fnv1a_u64(env.seq, h);
  h = fold_double(env.published_at, h);
  h = rnd::fnv1a_u64(static_cast<std::uint64_t>(bus::kind_of(env.payload)), h);
  std::visit(
      [&h](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bus::AlarmSignal>) {
          h = rnd::fnv1a(p.camera_id, h);
          h = fold_double(p.alarm_time, h);
        } else if constexpr (std::is_same_v<T, bus::ProbeReport>) {
          h = rnd::fnv1a(p.camera_id, h);
          h = fold_double(p.entropy, h);
          h = rnd::fnv1a_u64(p.healthy ? 1 : 0, h);
        } else if constexpr (std::is_same_v<T, bus::FrameTask>) {
          h = fold_frame(p.frame, h);
          h = rnd::fnv1a_u64(p.escalate_semantics ? 1 : 0, h);
        } else if constexpr (std::is_same_v<T, bus::VerdictMsg>) {
          h = fold_result(p.result, h);
        } else if constexpr (std::is_same_v<T, bus::EventNotice>) {
          h = rnd::fnv1a(p.event.label.name(), h);
          h = rnd::fnv1a(p.event.camera_id, h);
          h = rnd::fnv1a_u64(static_cast<std::uint64_t>(p.event.start_frame), h);
          h = rnd::fnv1a_u64(static_cast<std::uint64_t>(p.event.end_frame), h);
          h = rnd::fnv1a_u64(p.event.frame_count, h);
        } else if constexpr (std::is_same_v<T, bus::SeverityAlert>) {
          h = rnd::fnv1a(p.visual_camera, h);
          h = rnd::fnv1a(p.contextual_camera, h);
          h = fold_double(p.score, h);
          h = rnd::fnv1a_u64(p.alert ? 1 : 0, h);
        }
      },
      env.payload);
  return h;
}

// Ring-buffered per-camera frame store backing the agents' StreamSource view.
class BufferSource : public agents::StreamSource {
 public:
  explicit BufferSource(const Scenario& s) {
    depth_ = std::max<std::size_t>(8, static_cast<std::size_t>(s.alarm_window) + 2);
    for (const auto& cam : s.cameras) {
      buffers_[cam.id];  // create
      checksums_[cam.id] = cam.config_checksum;
    }
  }

  void push(const std::string& camera_id, Frame frame, double now) {
    auto& buf = buffers_.at(camera_id);
    buf.push_back(agents::StampedFrame{std::move(frame), now});
    if (buf.size() > depth_) buf.pop_front();
  }

  std::optional<agents::StampedFrame> latest(const std::string& camera_id) const override {
    auto it = buffers_.find(camera_id);
    if (it == buffers_.end() || it->second.empty()) return std::nullopt;
    return it->second.back();
  }

  std::vector<Frame> recent(const std::string& camera_id, std::size_t n) const override {
    std::vector<Frame> out;
    auto it = buffers_.find(camera_id);
    if (it == buffers_.end()) return out;
    const auto& buf = it->second;
    const std::size_t take = std::min(n, buf.size());
    for (std::size_t i = buf.size() - take; i < buf.size(); ++i) {
      out.push_back(buf[i].frame);
    }
    return out;  // oldest first
  }

  std::uint64_t config_checksum(const std::string& camera_id) const override {
    auto it = checksums_.find(camera_id);
    return it == checksums_.end() ? 0 : it->second;
  }

 private:
  std::map<std::string, std::deque<agents::StampedFrame>> buffers_;
  std::map<std::string, std::uint64_t> checksums_;
  std::size_t depth_ = 8;
};

struct BuiltStages {
  std::unique_ptr<cascade::StageBackend> stage1;
  std::unique_ptr<cascade::StageBackend> stage2;
  std::unique_ptr<cascade::StageBackend> stage3;
  cascade::CascadeStages view() const {
    return cascade::CascadeStages{stage1.get(), stage2.get(), stage3.get()};
  }
};

BuiltStages build_stages(const Scenario& s, const semantics::EmbeddingFixture* fixture,
                         const semantics::PrototypeBank* bank) {
  BuiltStages built;

  cascade::StageProfile p1 = s.stage1.profile;
  p1.seed = rnd::combine(s.seed, "stage1");
  built.stage1 = std::make_unique<cascade::SyntheticStageBackend>(p1, 1);

  cascade::StageProfile p2 = s.stage2.profile;
  p2.seed = rnd::combine(s.seed, "stage2");
  if (s.stage2.kind == StageKind::proxy) {
    built.stage2 = std::make_unique<cascade::ProxyReconstructionBackend>(
        s.stage2.factor, p2.latency, p2.seed);
  } else {
    built.stage2 = std::make_unique<cascade::SyntheticStageBackend>(p2, 2);
  }

  cascade::StageProfile p3 = s.stage3.profile;
  p3.seed = rnd::combine(s.seed, "stage3");
  if (s.stage3.kind == StageKind::classifier_semantic) {
    built.stage3 = std::make_unique<cascade::SyntheticSemanticBackend>(
        p3, s.thresholds.tau_c, fixture, bank);
  } else {
    built.stage3 =
        std::make_unique<cascade::SyntheticSemanticBackend>(p3, s.thresholds.tau_c);
  }
  return built;
}

struct VisualDetection {
  std::int64_t tick = 0;
  std::string camera;
  double confidence = 0.0;
};

}  // namespace

RunOutcome run_scenario(const Scenario& s) {
  s.validate();

  RunOutcome out;
  bus::Broker broker(s.bus_retention);
  broker.register_standard_topics();

  Transcript& transcript = out.transcript;
  transcript.hash = 0xcbf29ce484222325ull;
  broker.set_tap([&transcript, cap = s.transcript_capacity](const bus::Envelope& env) {
    transcript.hash = fold_envelope(env, transcript.hash);
    transcript.total_published += 1;
    if (transcript.envelopes.size() < cap) {
      transcript.envelopes.push_back(env);
    }
  });

  BufferSource source(s);

  agents::CameraRegistry registry;
  registry.probe_interval = static_cast<double>(s.probe_interval_ticks) * kTickSeconds;
  for (const auto& cam : s.cameras) {
    registry.cameras.push_back(agents::CameraInfo{cam.id, cam.config_checksum});
  }

  // Mutable semantic state: the bank object stays at a fixed address so the
  // stage-III backend always reads the current centroids; EMA updates swap
  // the contents copy-on-write.
  semantics::EmbeddingFixture fixture;
  semantics::PrototypeBank bank;
  const bool classifier_mode = s.stage3.kind == StageKind::classifier_semantic;
  if (s.semantics_doc) {
    fixture = s.semantics_doc->fixture;
    bank = s.semantics_doc->bank;
    fixture.fallback_seed = rnd::combine(s.seed, "fixture");
  }

  BuiltStages stages = build_stages(s, &fixture, &bank);
  const cascade::CascadeStages stage_view = stages.view();

  agents::CyclicalMonitor monitor(broker, registry, source, s.thresholds);
  agents::EventAgent event_agent(broker, registry, source,
                                 static_cast<std::size_t>(s.alarm_window));
  bus::Subscription worker_sub = broker.subscribe(bus::topics::kTasks, "cascade_worker");

  // Alarm schedule: every loiter_alarm segment fires at its start tick, plus
  // any explicitly injected alarms.
  std::multimap<std::int64_t, std::string> alarm_schedule;
  for (const auto& seg : s.timeline) {
    if (seg.cls == "loiter_alarm") {
      alarm_schedule.emplace(seg.start_tick, seg.camera);
    }
  }
  for (const auto& alarm : s.injected_alarms) {
    alarm_schedule.emplace(alarm.tick, alarm.camera);
  }

  struct EffectiveSlot {
    std::size_t index;
    bool forced;
  };
  std::map<FrameRef, EffectiveSlot> effective;
  std::set<std::pair<FrameRef, bool>> seen;
  std::vector<VisualDetection> visual;
  std::map<std::pair<std::string, std::string>, std::int64_t> severity_last;

  const auto process_task = [&](const bus::FrameTask& task, std::int64_t tick,
                                double now) {
    const FrameRef ref{task.frame.camera_id, task.frame.stream_time};
    if (!seen.insert({ref, task.escalate_semantics}).second) {
      return;  // already examined in this mode
    }
    cascade::CascadeOptions opts;
    opts.force_stage3 = task.escalate_semantics;
    CascadeResult result = cascade::run_cascade(task.frame, stage_view, s.thresholds, opts);
    broker.publish(bus::topics::kVerdicts, bus::VerdictMsg{result}, now);
    out.results.push_back(result);
    const std::size_t idx = out.results.size() - 1;
    if (task.escalate_semantics) {
      out.escalation_results += 1;
    } else {
      out.first_pass_results += 1;
    }
    auto [it, inserted] = effective.try_emplace(ref, EffectiveSlot{idx, opts.force_stage3});
    if (!inserted && opts.force_stage3 && !it->second.forced) {
      it->second = EffectiveSlot{idx, true};  // deeper examination supersedes
    }

    const CascadeResult& r = out.results[idx];
    if (!r.forced && !r.final_label.is_benign() &&
        (r.exit_stage == Stage::object_detection ||
         r.exit_stage == Stage::reconstruction)) {
      visual.push_back(VisualDetection{tick, ref.camera_id,
                                       r.verdicts.back().confidence});
    }
    if (r.forced && r.exit_stage == Stage::semantic && !r.final_label.is_benign()) {
      // Contextual detection: fuse with the strongest visual detection in the
      // correlation window, at most once per camera pair per window.
      const VisualDetection* best = nullptr;
      for (const auto& v : visual) {
        if (v.tick < tick - s.correlation_window_ticks) continue;
        if (best == nullptr || v.confidence > best->confidence) best = &v;
      }
      if (best != nullptr) {
        const auto pair_key = std::make_pair(best->camera, ref.camera_id);
        auto last = severity_last.find(pair_key);
        if (last == severity_last.end() ||
            tick - last->second > s.correlation_window_ticks) {
          const double contextual = r.verdicts.back().confidence;
          const fusion::SeverityResult sev = fusion::severity(
              fusion::SeverityInput{best->confidence, contextual}, s.thresholds);
          bus::SeverityAlert alert{best->camera,      ref.camera_id,
                                   best->confidence,  contextual,
                                   sev.score,         sev.alert};
          broker.publish(bus::topics::kSeverity, alert, now);
          out.severity_alerts.push_back(alert);
          severity_last[pair_key] = tick;
        }
      }
      if (classifier_mode && s.ema_enabled) {
        // Accepted classifications drift their centroid; abstentions never do.
        const std::string& description = r.verdicts.back().detail;
        bank = semantics::ema_update(bank, r.final_label, fixture.embed(description));
      }
    }
  };

  for (std::int64_t tick = 0; tick < s.duration_ticks; ++tick) {
    const double now = static_cast<double>(tick) * kTickSeconds;
    try {
      // 1. Streams produce one frame per camera.
      for (const auto& cam : s.cameras) {
        const Segment* seg = s.active_segment(cam.id, tick);
        const std::string cls = seg ? seg->cls : "normal";
        const std::int64_t frozen_src =
            seg ? std::max<std::int64_t>(0, seg->start_tick - 1) : 0;
        Frame frame =
            generate_frame(cam, cls, tick, s.seed,
                           seg ? seg->params : std::map<std::string, double>{},
                           frozen_src);
        source.push(cam.id, std::move(frame), now);
        out.frames_generated += 1;
      }

      // 2. Silent alarms scheduled for this tick.
      for (auto [it, end] = alarm_schedule.equal_range(tick); it != end; ++it) {
        broker.publish(bus::topics::kAlerts, bus::AlarmSignal{it->second, now}, now);
      }

      // 3. Cyclical monitoring sweep.
      if (tick % s.probe_interval_ticks == 0) {
        auto statuses = monitor.run_sweep(now);
        out.health_log.insert(out.health_log.end(), statuses.begin(), statuses.end());
      }

      // 4. Event agent routes alarm context with forced escalation.
      event_agent.poll_and_handle(now);

      // 5. Ingest: every fresh frame enters the cascade queue.
      if (s.route_all_frames) {
        for (const auto& cam : s.cameras) {
          const auto stamped = source.latest(cam.id);
          broker.publish(bus::topics::kTasks, bus::FrameTask{stamped->frame, false},
                         now);
        }
      }

      // 6. Worker drains the queue; evaluations within a tick are independent.
      for (;;) {
        const auto envelopes = broker.poll(worker_sub, 256);
        if (envelopes.empty()) break;
        for (const auto& env : envelopes) {
          process_task(std::get<bus::FrameTask>(env.payload), tick, now);
        }
      }
    } catch (const Error& e) {
      raise(e.code(), "tick " + std::to_string(tick) + ": " + e.what());
    }
  }

  const double end_time = static_cast<double>(s.duration_ticks) * kTickSeconds;
  out.tasks_pending_at_shutdown =
      static_cast<std::size_t>(broker.max_seq(bus::topics::kTasks) - worker_sub.cursor);

  // Collapse per-frame verdicts into events over the effective view.
  out.effective_results.reserve(effective.size());
  for (const auto& [ref, slot] : effective) {
    out.effective_results.push_back(out.results[slot.index]);
  }
  out.events = fusion::merge_events(out.effective_results, s.event_gap);
  for (const auto& event : out.events) {
    broker.publish(bus::topics::kEvents, bus::EventNotice{event}, end_time);
  }

  if (!out.results.empty()) {
    const fusion::StageLatencies latencies{s.stage1.profile.latency.nominal,
                                           s.stage2.profile.latency.nominal,
                                           s.stage3.profile.latency.nominal};
    out.metrics = fusion::accounting(out.results, latencies, s.baseline_latency);
  }
  out.metrics.events_total = out.events.size();
  return out;
}

double macro_f1_proxy(const Scenario& s,
                      const std::vector<CascadeResult>& effective_results) {
  struct Tally {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<AnomalyLabel, Tally> tallies;
  for (const auto& r : effective_results) {
    const Segment* seg =
        s.active_segment(r.frame_ref.camera_id, r.frame_ref.stream_time);
    AnomalyLabel truth = seg ? (seg->truth_label
                                    ? AnomalyLabel::from_name(*seg->truth_label)
                                    : truth_label_for_class(seg->cls))
                             : AnomalyLabel(AnomalyLabel::Kind::benign);
    const AnomalyLabel& predicted = r.final_label;
    if (predicted == truth) {
      tallies[truth].tp += 1;
    } else {
      tallies[predicted].fp += 1;
      tallies[truth].fn += 1;
    }
  }
  if (tallies.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [label, t] : tallies) {
    const double denom = static_cast<double>(2 * t.tp + t.fp + t.fn);
    sum += denom > 0.0 ? (2.0 * static_cast<double>(t.tp)) / denom : 0.0;
  }
  return sum / static_cast<double>(tallies.size());
}

std::vector<SweepRow> run_sweep(const Scenario& s, const SweepSpec& spec) {
  spec.validate();
  std::vector<std::string> requested = spec.metrics;
  if (requested.empty()) {
    requested = {metric_names::kEarlyExitPct, metric_names::kMacroF1Proxy,
                 metric_names::kMeanLatency, metric_names::kAcceptedFraction};
  }

  std::vector<SweepRow> rows;
  rows.reserve(spec.values.size());
  for (double value : spec.values) {
    Scenario variant = s;
    if (spec.parameter == "tau1") {
      variant.thresholds.tau1 = value;
    } else if (spec.parameter == "tau2") {
      variant.thresholds.tau2 = value;
    } else {
      variant.thresholds.tau_c = value;
    }
    const RunOutcome outcome = run_scenario(variant);

    SweepRow row;
    row.value = value;
    for (const auto& name : requested) {
      double metric = 0.0;
      if (name == metric_names::kEarlyExitPct) {
        if (outcome.metrics.frames_total > 0) {
          metric = 100.0 * (outcome.metrics.exit_fractions[0] +
                            outcome.metrics.exit_fractions[1]);
        }
      } else if (name == metric_names::kMacroF1Proxy) {
        metric = macro_f1_proxy(variant, outcome.effective_results);
      } else if (name == metric_names::kMeanLatency) {
        metric = outcome.metrics.mean_latency;
      } else {
        std::size_t semantic_total = 0, accepted = 0;
        for (const auto& r : outcome.results) {
          if (r.exit_stage != Stage::semantic) continue;
          semantic_total += 1;
          if (!r.final_label.is_benign()) accepted += 1;
        }
        metric = semantic_total > 0 ? static_cast<double>(accepted) /
                                          static_cast<double>(semantic_total)
                                    : 0.0;
      }
      row.metrics.emplace_back(name, metric);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sentinel::harness

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sentinel/agents.hpp"
#include "sentinel/bus.hpp"
#include "sentinel/cascade.hpp"
#include "sentinel/domain.hpp"
#include "sentinel/fusion.hpp"
#include "sentinel/semantics.hpp"

// Scenario-driven simulation: deterministic synthetic camera streams, the
// end-to-end loop wiring agents + bus + cascade + fusion under a simulated
// clock, threshold sweeps, and report emission. One tick is one frame period
// at 30 fps.

namespace sentinel::harness {

inline constexpr double kTickSeconds = 1.0 / 30.0;

struct CameraSpec {
  std::string id;
  int width = 32;
  int height = 32;
  int channels = 3;
  std::uint64_t config_checksum = 0;
};

// A scripted stretch of one camera's timeline. Ticks outside any segment are
// class "normal". end_tick is inclusive.
struct Segment {
  std::string camera;
  std::int64_t start_tick = 0;
  std::int64_t end_tick = 0;
  std::string cls = "normal";
  std::map<std::string, double> params;
  std::optional<std::string> truth_label;  // ground-truth override for scoring
};

struct InjectedAlarm {
  std::string camera;
  std::int64_t tick = 0;
};

enum class StageKind { synthetic, proxy, direct_semantic, classifier_semantic };

struct StageConfig {
  StageKind kind = StageKind::synthetic;
  cascade::StageProfile profile;
  int factor = 4;  // proxy reconstruction downsample ratio
};

struct Scenario {
  std::string version = "v1";
  std::uint64_t seed = 0;
  std::int64_t duration_ticks = 0;
  std::int64_t probe_interval_ticks = 30;
  std::int64_t correlation_window_ticks = 90;
  std::int64_t alarm_window = 4;
  std::int64_t event_gap = 0;
  bool route_all_frames = true;
  bool ema_enabled = true;
  std::size_t bus_retention = 0;        // 0 = unbounded
  std::size_t transcript_capacity = 100000;
  double baseline_latency = 8.7;        // all-stage-III counterfactual, s/frame
  Thresholds thresholds;
  std::vector<CameraSpec> cameras;
  std::vector<Segment> timeline;
  StageConfig stage1;
  StageConfig stage2;
  StageConfig stage3;
  std::optional<semantics::BankDocument> semantics_doc;
  std::vector<InjectedAlarm> injected_alarms;

  void validate() const;
  const CameraSpec* find_camera(const std::string& id) const;
  const Segment* active_segment(const std::string& camera, std::int64_t tick) const;
  std::string class_at(const std::string& camera, std::int64_t tick) const;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario_file(const std::string& path);

// Scripted class -> expected label, for the macro-F1 proxy.
AnomalyLabel truth_label_for_class(const std::string& cls);

// --- Stream generation -------------------------------------------------------

// One deterministic frame. Recipes per class:
//   normal       smooth seeded gradient; entropy well above tau_h, proxy
//                reconstruction error well below tau2
//   obstruction  near-constant dark frame; entropy < 1
//   noise_burst  white noise; proxy error far above tau2
//   frozen       byte-identical repeat of the normal frame preceding the
//                segment
//   loiter_alarm normal-looking pixels (the class tag is what matters)
// Unknown class names fall back to a parametric recipe driven by `params`
// ("base", "noise", "ramp"); with no params they throw
// Errc::unknown_scenario_class.
Frame generate_frame(const CameraSpec& cam, const std::string& cls,
                     std::int64_t tick, std::uint64_t seed,
                     const std::map<std::string, double>& params = {},
                     std::int64_t frozen_source_tick = 0);

std::vector<Frame> generate_stream(const CameraSpec& cam, const std::string& cls,
                                   std::int64_t start_tick, std::int64_t end_tick,
                                   std::uint64_t seed,
                                   const std::map<std::string, double>& params = {});

// --- End-to-end run ----------------------------------------------------------

struct Transcript {
  std::vector<bus::Envelope> envelopes;  // first `transcript_capacity` only
  std::size_t total_published = 0;
  std::uint64_t hash = 0;  // streaming hash over every envelope
};

struct RunOutcome {
  fusion::RunMetrics metrics;
  std::vector<fusion::Event> events;
  Transcript transcript;
  std::vector<CascadeResult> results;  // every cascade execution, in order
  // One result per generated frame that reached the cascade, sorted by
  // (camera, tick); an alarm-forced re-examination supersedes the first pass.
  std::vector<CascadeResult> effective_results;
  std::vector<agents::HealthStatus> health_log;
  std::vector<bus::SeverityAlert> severity_alerts;
  std::size_t frames_generated = 0;
  std::size_t first_pass_results = 0;
  std::size_t escalation_results = 0;
  std::size_t tasks_pending_at_shutdown = 0;
};

// Deterministic: identical scenarios produce identical outcomes, transcripts
// and hashes. Component errors propagate with tick context attached.
RunOutcome run_scenario(const Scenario& s);

// Macro-averaged F1 of effective final labels against the scripted classes.
double macro_f1_proxy(const Scenario& s,
                      const std::vector<CascadeResult>& effective_results);

// --- Sweeps ------------------------------------------------------------------

namespace metric_names {
inline constexpr const char* kEarlyExitPct = "early_exit_pct";
inline constexpr const char* kMacroF1Proxy = "macro_f1_proxy";
inline constexpr const char* kMeanLatency = "mean_latency";
inline constexpr const char* kAcceptedFraction = "accepted_fraction";
}  // namespace metric_names

struct SweepSpec {
  std::string parameter;             // tau1 | tau2 | tau_c
  std::vector<double> values;        // ascending
  std::vector<std::string> metrics;  // empty = all

  void validate() const;
};

struct SweepRow {
  double value = 0.0;
  std::vector<std::pair<std::string, double>> metrics;  // in requested order
};

// One fresh run_scenario per value, same seed; no RNG state crosses rows.
std::vector<SweepRow> run_sweep(const Scenario& s, const SweepSpec& spec);

// --- Reports -----------------------------------------------------------------

// Events table with the fixed column order
//   label,camera,start,end,frames,err_min,err_mean,err_max,conf_mean,source
// Error columns are empty when the reconstruction stage never ran.
std::string events_csv(const std::vector<fusion::Event>& events);

nlohmann::json report_json(const fusion::RunMetrics& metrics,
                           const std::vector<fusion::Event>& events);

// format "csv" writes events.csv + metrics.json; "json" writes report.json.
// Bytes are deterministic for a given run. Throws Errc::io_failure.
void emit_report(const fusion::RunMetrics& metrics,
                 const std::vector<fusion::Event>& events,
                 const std::string& format, const std::string& out_dir);

std::string sweep_csv(const std::string& parameter,
                      const std::vector<SweepRow>& rows);

// Shortest decimal representation that round-trips; used everywhere a float
// lands in a CSV cell.
std::string format_double(double v);

}  // namespace sentinel::harness

// Command-line front end for the anomaly-detection cascade simulator.
//
//   sentinel run    --scenario <file> [--out dir] [--format csv|json]
//   sentinel sweep  --scenario <file> --param tau1|tau2|tau_c --values a,b,c
//   sentinel probe  --scenario <file> --alarm <camera> --tick <n>
//   sentinel report --in <rundir>
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.
// CASCADE_SEED overrides the scenario seed.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sentinel/scenario.hpp"

namespace {

using namespace sentinel;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

harness::Scenario load_scenario(const std::string& path) {
  harness::Scenario s = harness::load_scenario_file(path);
  if (const char* seed_env = std::getenv("CASCADE_SEED")) {
    s.seed = std::strtoull(seed_env, nullptr, 10);
  }
  return s;
}

void print_metrics(const fusion::RunMetrics& m) {
  std::printf("frames           %zu\n", m.frames_total);
  std::printf("exits I/II/III   %zu / %zu / %zu\n", m.exits_by_stage[0],
              m.exits_by_stage[1], m.exits_by_stage[2]);
  std::printf("exit fractions   %.4f / %.4f / %.4f\n", m.exit_fractions[0],
              m.exit_fractions[1], m.exit_fractions[2]);
  std::printf("mean latency     %.6f s/frame\n", m.mean_latency);
  std::printf("baseline         %.6f s/frame\n", m.baseline_latency);
  std::printf("speedup          %.2fx\n", m.speedup_ratio);
  std::printf("events           %zu\n", m.events_total);
}

void print_events(const std::vector<fusion::Event>& events, std::size_t limit) {
  for (std::size_t i = 0; i < events.size() && i < limit; ++i) {
    const auto& e = events[i];
    std::printf("  %-20s %-10s ticks %lld..%lld (%zu frames, conf %.3f)\n",
                e.label.name().c_str(), e.camera_id.c_str(),
                static_cast<long long>(e.start_frame),
                static_cast<long long>(e.end_frame), e.frame_count,
                e.mean_confidence);
  }
  if (events.size() > limit) {
    std::printf("  ... %zu more\n", events.size() - limit);
  }
}

nlohmann::json run_summary_json(const harness::RunOutcome& outcome) {
  nlohmann::json j;
  j["metrics"] = outcome.metrics;
  j["events"] = outcome.events;
  j["transcript_hash"] = outcome.transcript.hash;
  j["envelopes_published"] = outcome.transcript.total_published;
  j["frames_generated"] = outcome.frames_generated;
  j["first_pass_results"] = outcome.first_pass_results;
  j["escalation_results"] = outcome.escalation_results;
  j["tasks_pending_at_shutdown"] = outcome.tasks_pending_at_shutdown;
  nlohmann::json alerts = nlohmann::json::array();
  for (const auto& a : outcome.severity_alerts) {
    alerts.push_back({{"visual_camera", a.visual_camera},
                      {"contextual_camera", a.contextual_camera},
                      {"conf_visual", a.conf_visual},
                      {"conf_contextual", a.conf_contextual},
                      {"score", a.score},
                      {"alert", a.alert}});
  }
  j["severity_alerts"] = alerts;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::io_failure, "cannot write '" + path.string() + "'");
  out << bytes;
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::string& format) {
  const harness::Scenario s = load_scenario(scenario_path);
  const harness::RunOutcome outcome = harness::run_scenario(s);

  print_metrics(outcome.metrics);
  for (const auto& a : outcome.severity_alerts) {
    std::printf("severity alert   %s + %s -> score %.3f%s\n",
                a.visual_camera.c_str(), a.contextual_camera.c_str(), a.score,
                a.alert ? " (HIGH PRIORITY)" : "");
  }
  std::printf("transcript hash  %016llx\n",
              static_cast<unsigned long long>(outcome.transcript.hash));
  print_events(outcome.events, 20);

  if (!out_dir.empty()) {
    harness::emit_report(outcome.metrics, outcome.events, format, out_dir);
    write_text(std::filesystem::path(out_dir) / "run.json",
               run_summary_json(outcome).dump(2) + "\n");
    std::printf("report written to %s\n", out_dir.c_str());
  }
  return kExitOk;
}

int cmd_sweep(const std::string& scenario_path, const std::string& param,
              const std::vector<double>& values,
              const std::vector<std::string>& metrics,
              const std::string& out_dir) {
  const harness::Scenario s = load_scenario(scenario_path);
  harness::SweepSpec spec;
  spec.parameter = param;
  spec.values = values;
  spec.metrics = metrics;
  const auto rows = harness::run_sweep(s, spec);

  const std::string csv = harness::sweep_csv(param, rows);
  std::fputs(csv.c_str(), stdout);
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) raise(Errc::io_failure, "cannot create '" + out_dir + "'");
    write_text(std::filesystem::path(out_dir) / "sweep.csv", csv);
    std::printf("sweep written to %s/sweep.csv\n", out_dir.c_str());
  }
  return kExitOk;
}

int cmd_probe(const std::string& scenario_path, const std::string& camera,
              std::int64_t tick, const std::string& out_dir) {
  harness::Scenario s = load_scenario(scenario_path);
  s.injected_alarms.push_back(harness::InjectedAlarm{camera, tick});
  const harness::RunOutcome outcome = harness::run_scenario(s);

  std::printf("injected alarm on '%s' at tick %lld\n", camera.c_str(),
              static_cast<long long>(tick));
  std::size_t unhealthy = 0;
  for (const auto& h : outcome.health_log) {
    if (!h.healthy()) ++unhealthy;
  }
  std::printf("probe reports    %zu (%zu unhealthy)\n", outcome.health_log.size(),
              unhealthy);
  std::printf("escalations      %zu\n", outcome.escalation_results);
  for (const auto& a : outcome.severity_alerts) {
    std::printf("severity alert   %s + %s -> score %.3f%s\n",
                a.visual_camera.c_str(), a.contextual_camera.c_str(), a.score,
                a.alert ? " (HIGH PRIORITY)" : "");
  }
  print_metrics(outcome.metrics);
  if (!out_dir.empty()) {
    harness::emit_report(outcome.metrics, outcome.events, "json", out_dir);
    write_text(std::filesystem::path(out_dir) / "run.json",
               run_summary_json(outcome).dump(2) + "\n");
    std::printf("report written to %s\n", out_dir.c_str());
  }
  return kExitOk;
}

int cmd_report(const std::string& in_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(in_dir);
  fs::path source;
  for (const char* name : {"run.json", "report.json"}) {
    if (fs::exists(dir / name)) {
      source = dir / name;
      break;
    }
  }
  if (source.empty()) {
    raise(Errc::io_failure, "no run.json or report.json under '" + in_dir + "'");
  }
  std::ifstream in(source);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::io_failure, "malformed report: " + std::string(e.what()));
  }
  const fusion::RunMetrics metrics = j.at("metrics").get<fusion::RunMetrics>();
  const auto events = j.at("events").get<std::vector<fusion::Event>>();
  std::printf("report: %s\n", source.string().c_str());
  print_metrics(metrics);
  print_events(events, 50);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic cascading multi-agent anomaly-detection simulator"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, format = "csv", param, camera, in_dir;
  std::vector<double> values;
  std::vector<std::string> metrics;
  std::int64_t tick = 0;

  CLI::App* run = app.add_subcommand("run", "execute a scenario end to end");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "directory for reports");
  run->add_option("--format", format, "report format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* sweep =
      app.add_subcommand("sweep", "re-run a scenario across threshold values");
  sweep->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  sweep->add_option("--param", param, "tau1, tau2 or tau_c")->required();
  sweep->add_option("--values", values, "threshold values, ascending")
      ->required()
      ->delimiter(',');
  sweep
      ->add_option("--metrics", metrics,
                   "subset of early_exit_pct,macro_f1_proxy,mean_latency,"
                   "accepted_fraction")
      ->delimiter(',');
  sweep->add_option("--out", out_dir, "directory for sweep.csv");

  CLI::App* probe = app.add_subcommand("probe", "run with an injected alarm");
  probe->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  probe->add_option("--alarm", camera, "camera to alarm")->required();
  probe->add_option("--tick", tick, "tick at which the alarm fires")->required();
  probe->add_option("--out", out_dir, "directory for reports");

  CLI::App* report = app.add_subcommand("report", "pretty-print a saved run");
  report->add_option("--in", in_dir, "directory holding run.json/report.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_dir, format);
    if (sweep->parsed()) return cmd_sweep(scenario_path, param, values, metrics, out_dir);
    if (probe->parsed()) return cmd_probe(scenario_path, camera, tick, out_dir);
    if (report->parsed()) return cmd_report(in_dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.code()) {
      case Errc::config_error:
      case Errc::io_failure:
      case Errc::bound_violation:
      case Errc::weight_sum_violation:
        return kExitConfig;
      default:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

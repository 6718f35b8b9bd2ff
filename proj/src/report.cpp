#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sentinel/scenario.hpp"

namespace sentinel::harness {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string events_csv(const std::vector<fusion::Event>& events) {
  std::ostringstream out;
  out << "label,camera,start,end,frames,err_min,err_mean,err_max,conf_mean,source\n";
  for (const auto& e : events) {
    out << e.label.name() << ',' << e.camera_id << ',' << e.start_frame << ','
        << e.end_frame << ',' << e.frame_count << ',';
    if (e.error_stats.samples > 0) {
      out << format_double(e.error_stats.min) << ','
          << format_double(e.error_stats.mean) << ','
          << format_double(e.error_stats.max) << ',';
    } else {
      out << ",,,";
    }
    out << format_double(e.mean_confidence) << ',' << e.source << '\n';
  }
  return out.str();
}

nlohmann::json report_json(const fusion::RunMetrics& metrics,
                           const std::vector<fusion::Event>& events) {
  return nlohmann::json{{"metrics", metrics}, {"events", events}};
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    raise(Errc::io_failure, "cannot write '" + path.string() + "'");
  }
  out << bytes;
  if (!out) {
    raise(Errc::io_failure, "short write to '" + path.string() + "'");
  }
}

}  // namespace

void emit_report(const fusion::RunMetrics& metrics,
                 const std::vector<fusion::Event>& events,
                 const std::string& format, const std::string& out_dir) {
  if (format != "csv" && format != "json") {
    raise(Errc::config_error, "report format must be csv or json, got '" + format + "'");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    raise(Errc::io_failure, "cannot create '" + out_dir + "': " + ec.message());
  }
  const std::filesystem::path dir(out_dir);
  if (format == "csv") {
    write_file(dir / "events.csv", events_csv(events));
    write_file(dir / "metrics.json", nlohmann::json(metrics).dump(2) + "\n");
  } else {
    write_file(dir / "report.json", report_json(metrics, events).dump(2) + "\n");
  }
}

std::string sweep_csv(const std::string& parameter,
                      const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << parameter;
  if (!rows.empty()) {
    for (const auto& [name, _] : rows.front().metrics) {
      out << ',' << name;
    }
  }
  out << '\n';
  for (const auto& row : rows) {
    out << format_double(row.value);
    for (const auto& [_, value] : row.metrics) {
      out << ',' << format_double(value);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sentinel::harness

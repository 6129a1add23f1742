#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cbf/errors.hpp"
#include "cbf/sim.hpp"

namespace cbf {

namespace {

// Shortest representation that round-trips; independent of the locale.
void put(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

std::string num(double v) {
  std::string s;
  put(s, v);
  return s;
}

void put_vec(std::string& out, const Vec& v) {
  for (int i = 0; i < v.size(); ++i) {
    out += ',';
    put(out, v[i]);
  }
}

void header(std::string& out, const char* prefix, int n) {
  for (int i = 0; i < n; ++i) {
    out += ',';
    out += prefix;
    out += std::to_string(i);
  }
}

}  // namespace

std::string trace_csv(const Trace& trace) {
  std::string out;
  int k = 0, m_cmd = 0, m = 0;
  if (!trace.records.empty()) {
    const Record& r0 = trace.records.front();
    k = static_cast<int>(r0.q.size());
    m_cmd = static_cast<int>(r0.command.size());
    m = static_cast<int>(r0.u.size());
  }
  out += "t";
  header(out, "q_", k);
  header(out, "qd_", k);
  header(out, "cmd_", m_cmd);
  header(out, "u_", m);
  out += ",h,hD,psi,intervened\n";
  out.reserve(out.size() + trace.records.size() * 24 * static_cast<std::size_t>(2 * k + m_cmd + m + 4));
  for (const Record& r : trace.records) {
    put(out, r.t);
    put_vec(out, r.q);
    put_vec(out, r.qdot);
    put_vec(out, r.command);
    put_vec(out, r.u);
    out += ',';
    put(out, r.h);
    out += ',';
    put(out, r.h_D);
    out += ',';
    put(out, r.psi);
    out += r.intervened ? ",1\n" : ",0\n";
  }
  return out;
}

std::string metrics_text(const Metrics& m) {
  std::string out;
  const auto line = [&](const char* key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  line("min_h", num(m.min_h));
  line("min_h_D", num(m.min_h_D));
  line("min_certified", num(m.min_certified));
  line("violation_steps", std::to_string(m.violation_steps));
  line("intervention_fraction", num(m.intervention_fraction));
  line("tracking_rms", num(m.tracking_rms));
  line("max_command_norm", num(m.max_command_norm));
  line("records", std::to_string(m.records));
  line("completed", m.completed ? "1" : "0");
  return out;
}

std::string metrics_json(const Metrics& m, const TraceMeta& meta) {
  nlohmann::ordered_json j;
  j["min_h"] = m.min_h;
  j["min_h_D"] = m.min_h_D;
  j["min_certified"] = m.min_certified;
  j["violation_steps"] = m.violation_steps;
  j["intervention_fraction"] = m.intervention_fraction;
  j["tracking_rms"] = m.tracking_rms;
  j["max_command_norm"] = m.max_command_norm;
  j["records"] = m.records;
  j["completed"] = m.completed;
  j["scenario_hash"] = meta.scenario_hash;
  j["tool_version"] = meta.tool_version;
  j["initial_outside_safe_set"] = meta.initial_outside_safe_set;
  j["c_u"] = meta.c_u;
  j["c_l"] = meta.c_l;
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp(path + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, p);
}

void write_run_outputs(const std::string& dir, const std::string& stem, const RunResult& result) {
  const std::filesystem::path base = std::filesystem::path(dir) / stem;
  write_file_atomic(base.string() + ".trace.csv", trace_csv(result.trace));
  std::string text = metrics_text(result.metrics);
  text += "scenario_hash=" + result.trace.meta.scenario_hash + "\n";
  text += "tool_version=" + result.trace.meta.tool_version + "\n";
  if (result.trace.error) text += "error=" + *result.trace.error + "\n";
  write_file_atomic(base.string() + ".metrics.txt", text);
  std::string json = metrics_json(result.metrics, result.trace.meta);
  if (result.trace.error) {
    auto j = nlohmann::ordered_json::parse(json);
    j["error"] = *result.trace.error;
    json = j.dump(2) + "\n";
  }
  write_file_atomic(base.string() + ".metrics.json", json);
}

std::string format_table(const ComparisonTable& table) {
  std::size_t width = 8;
  for (const ComparisonRow& r : table.rows) width = std::max(width, r.label.size() + 2);
  const int lw = static_cast<int>(width);
  std::ostringstream os;
  os << std::left << std::setw(lw) << "label" << std::setw(22) << "filter" << std::right
     << std::setw(10) << "alpha" << std::setw(10) << "alpha_e" << std::setw(14) << "min_h"
     << std::setw(14) << "min_h_D" << std::setw(11) << "violations" << std::setw(12)
     << "interv_frac" << std::setw(14) << "tracking_rms" << "  status\n";
  for (const ComparisonRow& r : table.rows) {
    const Metrics& m = r.metrics;
    os << std::left << std::setw(lw) << r.label << std::setw(22) << to_string(r.filter)
       << std::right << std::setw(10) << num(r.alpha_gain) << std::setw(10) << num(r.alpha_e)
       << std::setw(14) << std::setprecision(6) << m.min_h << std::setw(14) << m.min_h_D
       << std::setw(11) << m.violation_steps << std::setw(12) << m.intervention_fraction
       << std::setw(14) << m.tracking_rms << "  ";
    if (r.error) {
      os << "error: " << *r.error;
    } else if (m.violation_steps > 0) {
      os << "VIOLATION";
    } else if (m.min_h < 0.0) {
      os << "h<0";
    } else {
      os << "safe";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace cbf

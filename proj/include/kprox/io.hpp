#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/diagnostics.hpp"
#include "kprox/engine.hpp"
#include "kprox/models/competing_risks.hpp"

namespace kprox {

// 17 significant digits: enough for double round trips to be exact.
inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

[[noreturn]] inline void parse_fail(const std::string& where, int line_no,
                                    const std::string& msg) {
  throw std::runtime_error(where + " line " + std::to_string(line_no) + ": " + msg);
}

inline double parse_double(const std::string& s, const std::string& where, int line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    parse_fail(where, line_no, "expected a number, got '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& where, int line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    parse_fail(where, line_no, "expected an integer, got '" + s + "'");
  return v;
}
}  // namespace detail

// Data CSV: a `# N0=<int>` comment, the fixed header, one row per interval.
inline void write_data_csv(std::ostream& out, const CompetingRisksData& data) {
  out << "# N0=" << data.N0 << "\n";
  out << "j,N_alive,c,b1,a2,b2\n";
  for (int j = 0; j < data.m; ++j) {
    const auto i = static_cast<std::size_t>(j);
    out << (j + 1) << ',' << data.N_alive[i] << ',' << data.c[i] << ',' << data.b1[i]
        << ',' << data.a2[i] << ',' << data.b2[i] << "\n";
  }
}

inline CompetingRisksData read_data_csv(std::istream& in, const std::string& where = "data csv") {
  CompetingRisksData data;
  bool seen_n0 = false, seen_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("N0=");
      if (pos != std::string::npos) {
        data.N0 = detail::parse_int(line.substr(pos + 3), where, line_no);
        seen_n0 = true;
      }
      continue;
    }
    if (!seen_header) {
      if (line != "j,N_alive,c,b1,a2,b2")
        detail::parse_fail(where, line_no,
                           "expected header 'j,N_alive,c,b1,a2,b2', got '" + line + "'");
      seen_header = true;
      continue;
    }
    const auto fields = detail::split_csv(line);
    if (fields.size() != 6)
      detail::parse_fail(where, line_no, "expected 6 fields, got " +
                                             std::to_string(fields.size()));
    const long long j = detail::parse_int(fields[0], where, line_no);
    if (j != data.m + 1)
      detail::parse_fail(where, line_no, "interval index " + std::to_string(j) +
                                             " out of order (expected " +
                                             std::to_string(data.m + 1) + ")");
    data.N_alive.push_back(detail::parse_int(fields[1], where, line_no));
    data.c.push_back(detail::parse_int(fields[2], where, line_no));
    data.b1.push_back(detail::parse_int(fields[3], where, line_no));
    data.a2.push_back(detail::parse_int(fields[4], where, line_no));
    data.b2.push_back(detail::parse_int(fields[5], where, line_no));
    ++data.m;
  }
  if (!seen_header) throw std::runtime_error(where + ": missing header row");
  if (!seen_n0) throw std::runtime_error(where + ": missing '# N0=<int>' line");
  try {
    cr_validate(data);
  } catch (const std::exception& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  return data;
}

inline CompetingRisksData read_data_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
  return read_data_csv(in, path);
}

// Mixture observations: header `x`, one value per row.
inline void write_observations_csv(std::ostream& out, const std::vector<double>& xs) {
  out << "x\n";
  for (double x : xs) out << fmt17(x) << "\n";
}

inline std::vector<double> read_observations_csv(std::istream& in,
                                                 const std::string& where = "observations csv") {
  std::vector<double> xs;
  std::string line;
  int line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != "x")
        detail::parse_fail(where, line_no, "expected header 'x', got '" + line + "'");
      seen_header = true;
      continue;
    }
    xs.push_back(detail::parse_double(line, where, line_no));
  }
  if (!seen_header) throw std::runtime_error(where + ": missing header row");
  return xs;
}

inline std::vector<double> read_observations_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file '" + path + "'");
  return read_observations_csv(in, path);
}

// Trace CSV: fixed run columns, then one column per parameter coordinate.
inline void write_trace_csv(std::ostream& out, const RunTrace& trace,
                            const std::vector<std::string>& param_names) {
  out << "k,beta,loglik,divergence_from_prev,step_norm,inner_evals,inner_accepted";
  for (const auto& name : param_names) out << ',' << name;
  out << "\n";
  for (const auto& rec : trace.records) {
    out << rec.k << ',' << fmt17(rec.beta) << ',' << fmt17(rec.loglik) << ','
        << fmt17(rec.divergence_from_prev) << ',' << fmt17(rec.step_norm) << ','
        << rec.inner_evals << ',' << rec.inner_accepted;
    for (double v : rec.theta) out << ',' << fmt17(v);
    out << "\n";
  }
}

struct TraceFile {
  std::vector<IterationRecord> records;
  std::vector<std::string> param_names;
};

inline TraceFile read_trace_csv(std::istream& in, const std::string& where = "trace csv") {
  TraceFile tf;
  std::string line;
  int line_no = 0;
  bool seen_header = false;
  const std::vector<std::string> fixed = {
      "k", "beta", "loglik", "divergence_from_prev", "step_norm", "inner_evals",
      "inner_accepted"};
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (!seen_header) {
      if (fields.size() < fixed.size())
        detail::parse_fail(where, line_no, "header has too few columns");
      for (std::size_t i = 0; i < fixed.size(); ++i)
        if (fields[i] != fixed[i])
          detail::parse_fail(where, line_no, "unexpected header column '" + fields[i] +
                                                 "' (expected '" + fixed[i] + "')");
      tf.param_names.assign(fields.begin() + static_cast<long>(fixed.size()), fields.end());
      seen_header = true;
      continue;
    }
    if (fields.size() != fixed.size() + tf.param_names.size())
      detail::parse_fail(where, line_no, "expected " +
                                             std::to_string(fixed.size() + tf.param_names.size()) +
                                             " fields, got " + std::to_string(fields.size()));
    IterationRecord rec;
    rec.k = static_cast<int>(detail::parse_int(fields[0], where, line_no));
    rec.beta = detail::parse_double(fields[1], where, line_no);
    rec.loglik = detail::parse_double(fields[2], where, line_no);
    rec.divergence_from_prev = detail::parse_double(fields[3], where, line_no);
    rec.step_norm = detail::parse_double(fields[4], where, line_no);
    rec.inner_evals = static_cast<long>(detail::parse_int(fields[5], where, line_no));
    rec.inner_accepted = static_cast<long>(detail::parse_int(fields[6], where, line_no));
    for (std::size_t i = fixed.size(); i < fields.size(); ++i)
      rec.theta.push_back(detail::parse_double(fields[i], where, line_no));
    tf.records.push_back(std::move(rec));
  }
  if (!seen_header) throw std::runtime_error(where + ": missing header row");
  return tf;
}

// Final parameters: one (name, value) row per coordinate.
inline void write_params_csv(std::ostream& out, const std::vector<std::string>& names,
                             const vec& theta) {
  out << "parameter,value\n";
  for (std::size_t i = 0; i < theta.size(); ++i)
    out << (i < names.size() ? names[i] : "theta_" + std::to_string(i + 1)) << ','
        << fmt17(theta[i]) << "\n";
}

inline void write_kkt_report(std::ostream& out, const KKTReport& report) {
  out << "active_set_size: " << report.active_set.size() << "\n";
  out << "active_set:";
  for (std::size_t i : report.active_set) out << ' ' << i;
  out << "\n";
  out << "multipliers:";
  for (double m : report.multipliers) out << ' ' << fmt17(m);
  out << "\n";
  out << "residual_norm: " << fmt17(report.residual_norm) << "\n";
  out << "gradient_norm: " << fmt17(report.gradient_norm) << "\n";
  out << "multipliers_nonnegative: " << (report.multipliers_nonnegative ? "true" : "false")
      << "\n";
  out << "degenerate: " << (report.degenerate ? "true" : "false") << "\n";
}

struct SweepRow {
  double beta = 0.0;
  long long seed = 0;
  int iterations = 0;
  double final_loglik = 0.0;
  double loglik_at_50 = 0.0;
  std::string terminated_by;
};

inline void write_sweep_summary(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "beta,seed,iterations,final_loglik,loglik_at_50,terminated_by\n";
  for (const auto& row : rows)
    out << fmt17(row.beta) << ',' << row.seed << ',' << row.iterations << ','
        << fmt17(row.final_loglik) << ',' << fmt17(row.loglik_at_50) << ','
        << row.terminated_by << "\n";
}

}  // namespace kprox

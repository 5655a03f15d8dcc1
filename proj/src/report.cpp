#include "celldrain/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace celldrain {

namespace {

void write_header(std::ostream& os, const OutputHeader& header) {
  os << "# tool=" << kToolVersion << "\n";
  os << "# config_hash=" << header.config_hash << "\n";
  os << "# seed=" << header.seed << "\n";
}

std::ofstream open_or_throw(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open output file: " + path);
  return os;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string format_duration(double seconds) {
  const long total_min = std::lround(seconds / 60.0);
  const long h = total_min / 60;
  const long m = total_min % 60;
  std::ostringstream os;
  os << h << (h == 1 ? " hr " : " hrs ") << m << (m == 1 ? " min" : " mins");
  return os.str();
}

void write_trace_csv(const std::string& path, const SimResult& result,
                     const OutputHeader& header) {
  std::ofstream os = open_or_throw(path);
  write_header(os, header);
  os << "# method=" << result.method << "\n";
  os << "t,i_applied,v_terminal,soc_true,soe,t_s,t_c_true,t_c_est,diag\n";
  for (const SimRow& r : result.trace.rows) {
    os << num(r.t) << ',' << num(r.i_applied) << ',' << num(r.v_terminal) << ','
       << num(r.soc_true) << ',' << num(r.soe) << ',' << num(r.t_s) << ','
       << num(r.t_c_true) << ',' << num(r.t_c_est) << ",\"" << r.diag << "\"\n";
  }
  if (result.end == SimEnd::kFault) {
    os << "# fault: " << result.fault_message << "\n";
  } else if (result.end == SimEnd::kTimeout) {
    os << "# timeout\n";
  }
}

void write_benchmark_csv(const std::string& path, const BenchmarkResult& result,
                         const OutputHeader& header) {
  std::ofstream os = open_or_throw(path);
  write_header(os, header);
  os << "method,discharge_time_s,max_core_temp_c,constraint_satisfied,completed,note\n";
  for (const BenchmarkRow& row : result.rows) {
    os << row.method << ',' << num(row.discharge_time) << ','
       << num(row.max_core_temp) << ',' << (row.constraint_satisfied ? "yes" : "no")
       << ',' << (row.completed ? "yes" : "no") << ",\"" << row.note << "\"\n";
  }
}

std::string format_benchmark_table(const BenchmarkResult& result) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s  %-16s  %-10s  %-12s\n", "Method",
                "Discharge time", "Max. temp.", "Cons. satis.");
  os << line;
  os << std::string(56, '-') << "\n";
  for (const BenchmarkRow& row : result.rows) {
    char temp[32];
    std::snprintf(temp, sizeof(temp), "%.2f C", row.max_core_temp);
    const std::string time_str =
        row.completed ? format_duration(row.discharge_time)
                      : (row.note.empty() ? "-" : row.note);
    std::snprintf(line, sizeof(line), "%-12s  %-16s  %-10s  %-12s\n",
                  row.method.c_str(), time_str.c_str(), temp,
                  row.constraint_satisfied ? "Yes" : "No");
    os << line;
  }
  return os.str();
}

void write_panel_csvs(const std::string& dir, const BenchmarkResult& result,
                      const OutputHeader& header) {
  struct Panel {
    const char* file;
    double SimRow::* field;
  };
  const Panel panels[] = {
      {"panel_soe.csv", &SimRow::soe},
      {"panel_voltage.csv", &SimRow::v_terminal},
      {"panel_current.csv", &SimRow::i_applied},
      {"panel_core_temp.csv", &SimRow::t_c_true},
  };
  for (const Panel& panel : panels) {
    std::ofstream os = open_or_throw(dir + "/" + panel.file);
    write_header(os, header);
    os << "method,t,value\n";
    for (const SimResult& run : result.runs) {
      for (const SimRow& r : run.trace.rows) {
        os << run.method << ',' << num(r.t) << ',' << num(r.*panel.field) << "\n";
      }
    }
  }
}

void write_polytope_csv(const std::string& path, const Polytope& poly,
                        const OutputHeader& header) {
  std::ofstream os = open_or_throw(path);
  write_header(os, header);
  for (Eigen::Index i = 0; i < poly.num_rows(); ++i) {
    for (int j = 0; j < poly.dim(); ++j) os << num(poly.a()(i, j)) << ',';
    os << num(poly.b()[i]) << "\n";
  }
}

}  // namespace celldrain

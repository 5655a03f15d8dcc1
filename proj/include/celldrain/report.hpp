#pragma once

#include <string>
#include <vector>

#include "celldrain/polytope.hpp"
#include "celldrain/simulation.hpp"

// CSV trace emission and the Table-1-style benchmark summary. Every file
// starts with a header block recording config hash, seed and tool version
// so reruns are auditable.
namespace celldrain {

inline constexpr const char* kToolVersion = "celldrain 0.1.0";

struct OutputHeader {
  std::string config_hash;
  std::uint64_t seed = 0;
};

// "3 hrs 6 mins" (rounded to whole minutes).
std::string format_duration(double seconds);

void write_trace_csv(const std::string& path, const SimResult& result,
                     const OutputHeader& header);

void write_benchmark_csv(const std::string& path, const BenchmarkResult& result,
                         const OutputHeader& header);

// Aligned text table with the columns Method / Discharge time / Max. temp. /
// Cons. satis.
std::string format_benchmark_table(const BenchmarkResult& result);

// Long-format plot data (method,t,value) for the four result panels:
// soe, voltage, current, core temperature.
void write_panel_csvs(const std::string& dir, const BenchmarkResult& result,
                      const OutputHeader& header);

// Debug dump of a polytope as CSV rows (a_0,...,a_{n-1},b).
void write_polytope_csv(const std::string& path, const Polytope& poly,
                        const OutputHeader& header);

}  // namespace celldrain

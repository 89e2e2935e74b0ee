#pragma once

#include <iosfwd>
#include <vector>

#include "v2gflex/admm.hpp"

namespace v2g {

enum class BenchMode { monolithic_integer, admm_integer, admm_taylor, admm_wang };
const char* to_string(BenchMode m);
BenchMode bench_mode_from_string(const std::string& s);

struct BenchCell {
  int n_ev = 0;
  int horizon = 0;
  BenchMode mode = BenchMode::admm_taylor;
  double median_time_s = 0.0;
  double objective = 0.0;       // F + Q of the returned schedule
  double gap_vs_integer = 0.0;  // relative J_c gap vs the integer-mode run
  SolveStatus status = SolveStatus::optimal;
};

struct BenchmarkGrid {
  std::vector<BenchCell> cells;
  void to_csv(std::ostream& os) const;
  std::string to_json(int indent = 2) const;
  const BenchCell* find(int n_ev, int horizon, BenchMode mode) const;
};

struct BenchConfig {
  std::vector<int> ev_counts = {48, 96, 144};
  std::vector<int> horizons = {6, 12, 18};
  std::vector<BenchMode> modes = {BenchMode::monolithic_integer, BenchMode::admm_integer,
                                  BenchMode::admm_taylor, BenchMode::admm_wang};
  int repetitions = 1;
  std::uint64_t seed = 1;
  int vehicles_per_station = 12;
  double dt_h = 0.25;
  double cell_timeout_s = 300.0;
  int max_integer_binaries = 4000; // guard for the monolithic integer mode
};

/// Times every mode on every (EV count, horizon) cell of a synthetic grid.
/// All modes within a cell share the same instance (energy-cost stations,
/// zero-reference tracking fleet objective). Objectives are deterministic
/// across repetitions; times are medians.
BenchmarkGrid run_benchmark(const BenchConfig& cfg, const AdmmParams& params);

} // namespace v2g

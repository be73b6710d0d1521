// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "taskadc/filter_design.hpp"

namespace taskadc {

enum class Architecture { task_based, analog_recovery, digital_recovery };

std::string to_string(Architecture arch);
// Accepts task|analog|digital and the full names.
Architecture architecture_from_string(const std::string& s);
// Number of ADCs an architecture uses (task-based: the requested K).
int architecture_adcs(Architecture arch, const TaskModel& model, int k_task);

// Analog recovery (H = Gamma, K = N), digital recovery (H = I, K = M) or the
// task-based design; the digital filter and MSE follow from the loading rule.
FilterDesign baseline_design(const TaskModel& model, const AdcConfig& cfg, Architecture arch,
                             const DesignOptions& opt = {});

// Task instant moved to t0 through Gamma(f) exp(-j 2 pi f t0); the analog
// filter stays at its t0 = 0 design and only the digital filter is re-derived.
FilterDesign shifted_task_design(const TaskModel& model, double t0, const AdcConfig& cfg,
                                 const DesignOptions& opt = {},
                                 Architecture arch = Architecture::task_based);

// Midpoint average of the shifted-design nmse over n_t0 instants in [0, Ts).
double time_averaged_nmse(const TaskModel& model, const AdcConfig& cfg, std::size_t n_t0,
                          std::size_t grid_points = kDefaultGridPoints,
                          Architecture arch = Architecture::task_based);

// Same average in closed form: cross terms between different aliases average
// out over one sampling period, leaving a sum of per-alias contributions.
// Equals the midpoint rule once n_t0 exceeds twice the alias order.
double time_averaged_nmse_exact(const TaskModel& model, const AdcConfig& cfg,
                                std::size_t grid_points = kDefaultGridPoints,
                                Architecture arch = Architecture::task_based);

// Midpoint rule starting at n_t0 points and doubling until the relative change
// drops below rel_tol (or max_points is reached).
double converged_time_average(const TaskModel& model, const AdcConfig& cfg, std::size_t n_t0 = 16,
                              double rel_tol = 1e-3, std::size_t max_points = 1024,
                              std::size_t grid_points = kDefaultGridPoints,
                              Architecture arch = Architecture::task_based);

enum class TimeAveraging { exact, midpoint };

struct SearchSpec {
  double rate_budget = 0.0;                 // bits/s
  std::vector<int> k_range;                 // empty: 1..N (task-based)
  std::vector<int> b_range;                 // empty: 1..16
  std::optional<double> eta;                // empty: eta(b) schedule
  Architecture arch = Architecture::task_based;
  TimeAveraging averaging = TimeAveraging::exact;
  std::size_t n_t0 = 16;
  std::size_t grid_points = kDefaultGridPoints;
};

struct SearchEntry {
  int k = 0;
  int b = 0;
  double fs = 0.0;
  double nmse = 0.0;       // time-averaged
  double nmse_t0_0 = 0.0;  // task instant on a sample
  bool evaluated = false;  // false when K exceeds the rank bound
};

struct SearchResult {
  Architecture arch = Architecture::task_based;
  double rate_budget = 0.0;
  SearchEntry best;
  std::vector<SearchEntry> table;  // K ascending, b ascending
};

SearchResult rate_search(const TaskModel& model, const SearchSpec& spec);

// First budget in [r_lo, r_hi] whose best time-averaged nmse is <= target:
// a log-spaced scan (8 steps per decade) finds the first bracket, bisection in
// log R refines it. nullopt if no scanned budget reaches the target.
std::optional<double> minimum_budget(const TaskModel& model, SearchSpec spec, double target,
                                     double r_lo, double r_hi, double rel_tol = 1e-3);

}  // namespace taskadc

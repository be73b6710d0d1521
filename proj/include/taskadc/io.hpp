// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "taskadc/config_search.hpp"
#include "taskadc/scenario.hpp"
#include "taskadc/simulator.hpp"

namespace taskadc {

using Json = nlohmann::json;

// Shortest round-trip decimal form, independent of the C locale.
std::string format_number(double v);
std::string csv_line(const std::vector<std::string>& cells);

// {f_lo, f_hi, n, breakpoints}
Json grid_to_json(const FrequencyGrid& g);
FrequencyGrid grid_from_json(const Json& j);

// {grid, shape: [r, c], kind, values: per point, row-major interleaved re/im}
Json spectrum_to_json(const SpectralMatrixFunction& s);
SpectralMatrixFunction spectrum_from_json(const Json& j);

Json model_to_json(const TaskModel& m);
TaskModel model_from_json(const Json& j);

// Everything except the stacked H_bar and the sampled H, which are derived.
Json design_to_json(const FilterDesign& d);
FilterDesign design_from_json(const Json& j);

Json report_to_json(const SimulationReport& r);
std::string trials_csv(const SimulationReport& r);

Json search_to_json(const SearchResult& r);
// Columns K, b, fs, nmse, nmse_t0_0; cells that were not evaluated are skipped.
std::string search_table_csv(const SearchResult& r);

struct LoadedScenario {
  std::string id;
  std::string type;  // matched_filter | scalar | isotropic
  ScenarioSpec spec;
  TaskModel model;
};

// {N, M, f_nyq_hz, snr_db, sigma_phi_deg, channel: {file | seed}, grid_points, type}.
// A channel file holds M rows of N comma- or blank-separated numbers and is
// resolved relative to base_dir.
LoadedScenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir,
                                  std::size_t grid_points_override = 0);
LoadedScenario load_scenario(const std::filesystem::path& path, std::size_t grid_points_override = 0);
RMatrix read_matrix_file(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);

// 64-bit FNV-1a of the compact dump, as 16 hex digits.
std::string config_hash(const Json& config);

// Writes to a sibling temporary file and renames it over path.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace taskadc

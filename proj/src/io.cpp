// SPDX-License-Identifier: Apache-2.0
#include "taskadc/io.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace taskadc {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf.data(), end);
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
  return out;
}

Json grid_to_json(const FrequencyGrid& g) {
  return Json{{"f_lo", g.f_lo}, {"f_hi", g.f_hi}, {"n", g.base_points()},
              {"breakpoints", g.breakpoints()}};
}

FrequencyGrid grid_from_json(const Json& j) {
  FrequencyGrid g = make_frequency_grid(j.at("f_lo").get<double>(), j.at("f_hi").get<double>(),
                                        j.at("n").get<std::size_t>());
  if (j.contains("breakpoints")) {
    const auto bp = j.at("breakpoints").get<std::vector<double>>();
    if (!bp.empty()) g = refine_grid(g, bp);
  }
  return g;
}

namespace {

Json matrix_values(const CMatrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      a.push_back(m(r, c).real());
      a.push_back(m(r, c).imag());
    }
  }
  return a;
}

CMatrix matrix_from_values(const Json& a, Eigen::Index rows, Eigen::Index cols) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(2 * rows * cols)) {
    throw std::invalid_argument("json: matrix value count does not match its shape");
  }
  CMatrix m(rows, cols);
  std::size_t p = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, p += 2) {
      m(r, c) = cplx(a[p].get<double>(), a[p + 1].get<double>());
    }
  }
  return m;
}

Json vectors_to_json(const std::vector<Eigen::VectorXd>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  return a;
}

std::vector<Eigen::VectorXd> vectors_from_json(const Json& a) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& x : a) {
    const auto v = x.get<std::vector<double>>();
    out.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return out;
}

Prefilter prefilter_from_string(const std::string& s) {
  if (s == "task") return Prefilter::task;
  if (s == "identity") return Prefilter::identity;
  throw std::invalid_argument("json: unknown prefilter " + s);
}

}  // namespace

Json spectrum_to_json(const SpectralMatrixFunction& s) {
  Json values = Json::array();
  for (const auto& v : s.values) values.push_back(matrix_values(v));
  return Json{{"grid", grid_to_json(s.grid)},
              {"shape", {s.rows, s.cols}},
              {"kind", to_string(s.kind)},
              {"values", std::move(values)}};
}

SpectralMatrixFunction spectrum_from_json(const Json& j) {
  SpectralMatrixFunction s;
  s.grid = grid_from_json(j.at("grid"));
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2) throw std::invalid_argument("json: spectrum shape must have two entries");
  s.rows = shape[0];
  s.cols = shape[1];
  s.kind = spectrum_kind_from_string(j.at("kind").get<std::string>());
  const Json& vals = j.at("values");
  if (vals.size() != s.grid.size()) {
    throw std::invalid_argument("json: one spectrum value per grid point expected");
  }
  for (const auto& v : vals) s.values.push_back(matrix_from_values(v, s.rows, s.cols));
  s.validate();
  return s;
}

Json model_to_json(const TaskModel& m) {
  return Json{{"n_task", m.n_task},
              {"m_inputs", m.m_inputs},
              {"gamma", spectrum_to_json(m.gamma)},
              {"c_x", spectrum_to_json(m.c_x)},
              {"c_sx", spectrum_to_json(m.c_sx)}};
}

TaskModel model_from_json(const Json& j) {
  TaskModel m;
  m.n_task = j.at("n_task").get<Eigen::Index>();
  m.m_inputs = j.at("m_inputs").get<Eigen::Index>();
  m.gamma = spectrum_from_json(j.at("gamma"));
  m.c_x = spectrum_from_json(j.at("c_x"));
  m.c_sx = spectrum_from_json(j.at("c_sx"));
  m.validate();
  return m;
}

Json design_to_json(const FilterDesign& d) {
  SpectralMatrixFunction comp;
  comp.grid = d.base_grid;
  comp.kind = SpectrumKind::filter;
  comp.rows = d.compression.empty() ? 0 : d.compression.front().rows();
  comp.cols = d.compression.empty() ? 0 : d.compression.front().cols();
  comp.values = d.compression;
  Json j{{"K", d.cfg.k_adcs},
         {"fs", d.cfg.fs},
         {"b", d.cfg.bits},
         {"eta", d.cfg.eta},
         {"upsilon", d.upsilon},
         {"n_task", d.n_task},
         {"zeta", d.zeta},
         {"gamma_q", d.gamma_q},
         {"delta", d.delta},
         {"mse", d.mse_theory},
         {"nmse", d.nmse},
         {"task_energy", d.task_energy},
         {"t0", d.t0},
         {"prefilter", d.prefilter == Prefilter::task ? "task" : "identity"},
         {"compression", spectrum_to_json(comp)},
         {"sigma_gamma", vectors_to_json(d.sigma_gamma)},
         {"sigma_h", vectors_to_json(d.sigma_h)}};
  if (!d.g_freq.values.empty()) j["g"] = spectrum_to_json(d.g_freq);
  if (d.prefilter_response) j["prefilter_response"] = spectrum_to_json(*d.prefilter_response);
  return j;
}

FilterDesign design_from_json(const Json& j) {
  FilterDesign d;
  d.cfg.k_adcs = j.at("K").get<int>();
  d.cfg.fs = j.at("fs").get<double>();
  d.cfg.bits = j.at("b").get<int>();
  d.cfg.eta = j.at("eta").get<double>();
  d.cfg.validate();
  d.upsilon = j.at("upsilon").get<int>();
  d.n_task = j.at("n_task").get<Eigen::Index>();
  d.zeta = j.at("zeta").get<double>();
  d.gamma_q = j.at("gamma_q").get<double>();
  d.delta = j.at("delta").get<double>();
  d.mse_theory = j.at("mse").get<double>();
  d.nmse = j.at("nmse").get<double>();
  d.task_energy = j.at("task_energy").get<double>();
  d.t0 = j.at("t0").get<double>();
  d.prefilter = prefilter_from_string(j.at("prefilter").get<std::string>());
  SpectralMatrixFunction comp = spectrum_from_json(j.at("compression"));
  d.base_grid = comp.grid;
  d.compression = std::move(comp.values);
  d.sigma_gamma = vectors_from_json(j.at("sigma_gamma"));
  d.sigma_h = vectors_from_json(j.at("sigma_h"));
  if (j.contains("g")) d.g_freq = spectrum_from_json(j.at("g"));
  if (j.contains("prefilter_response")) {
    d.prefilter_response = spectrum_from_json(j.at("prefilter_response"));
  }
  return d;
}

Json report_to_json(const SimulationReport& r) {
  return Json{{"scenario", r.scenario_id},
              {"seed", r.seed},
              {"n_trials", r.n_trials},
              {"dithered", r.dithered},
              {"fs", r.fs},
              {"empirical_mse", r.empirical_mse},
              {"empirical_nmse", r.empirical_nmse},
              {"std_error", r.std_error},
              {"nmse_std_error", r.nmse_std_error},
              {"overload_rate", r.overload_rate},
              {"orthogonality_residual", r.orthogonality_residual},
              {"orthogonality_std_error", r.orthogonality_std_error},
              {"theory_nmse", r.theory_nmse}};
}

std::string trials_csv(const SimulationReport& r) {
  std::string out = csv_line({"trial", "sq_error", "overloads"});
  for (const auto& t : r.trials) {
    out += csv_line({std::to_string(t.trial), format_number(t.sq_error), std::to_string(t.overloads)});
  }
  return out;
}

Json search_to_json(const SearchResult& r) {
  auto entry = [](const SearchEntry& e) {
    return Json{{"K", e.k}, {"b", e.b}, {"fs", e.fs}, {"nmse", e.nmse},
                {"nmse_t0_0", e.nmse_t0_0}, {"evaluated", e.evaluated}};
  };
  Json table = Json::array();
  for (const auto& e : r.table) table.push_back(entry(e));
  return Json{{"architecture", to_string(r.arch)},
              {"rate_budget", r.rate_budget},
              {"best", entry(r.best)},
              {"table", std::move(table)}};
}

std::string search_table_csv(const SearchResult& r) {
  std::string out = csv_line({"K", "b", "fs", "nmse", "nmse_t0_0"});
  for (const auto& e : r.table) {
    if (!e.evaluated) continue;
    out += csv_line({std::to_string(e.k), std::to_string(e.b), format_number(e.fs),
                     format_number(e.nmse), format_number(e.nmse_t0_0)});
  }
  return out;
}

RMatrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open matrix file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& c : line) {
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    }
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::vector<double> row;
    double v = 0.0;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw std::invalid_argument("matrix file: unparsable entry in " + path.string());
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("matrix file is empty: " + path.string());
  RMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) {
      throw std::invalid_argument("matrix file: ragged rows in " + path.string());
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

LoadedScenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir,
                                  std::size_t grid_points_override) {
  LoadedScenario s;
  s.type = j.value("type", std::string("matched_filter"));
  s.id = j.value("id", s.type);
  ScenarioSpec& spec = s.spec;
  spec.grid_points = grid_points_override ? grid_points_override
                                          : j.value("grid_points", kDefaultGridPoints);
  spec.f_nyq = j.value("f_nyq_hz", spec.f_nyq);
  spec.snr_db = j.value("snr_db", spec.snr_db);
  if (s.type == "matched_filter") {
    spec.n_streams = j.value("N", spec.n_streams);
    spec.m_antennas = j.value("M", spec.m_antennas);
    if (j.contains("sigma_phi_deg")) {
      spec.sigma_phi = j.at("sigma_phi_deg").get<double>() * std::numbers::pi / 180.0;
    }
    if (j.contains("channel")) {
      const Json& ch = j.at("channel");
      if (ch.contains("file")) {
        spec.channel = read_matrix_file(base_dir / ch.at("file").get<std::string>());
      } else if (ch.contains("seed")) {
        spec.channel_seed = ch.at("seed").get<std::uint64_t>();
      } else {
        throw std::invalid_argument("scenario: channel needs 'file' or 'seed'");
      }
    }
    s.model = build_scenario(spec);
  } else if (s.type == "scalar") {
    spec.n_streams = 1;
    spec.m_antennas = 1;
    s.model = scalar_scenario(spec.f_nyq, spec.snr_db, spec.grid_points);
  } else if (s.type == "isotropic") {
    const int n = j.value("N", 3);
    spec.n_streams = n;
    spec.m_antennas = n;
    s.model = isotropic_scenario(n, spec.f_nyq, j.value("gain", 0.5), spec.grid_points);
  } else {
    throw std::invalid_argument("scenario: unknown type " + s.type);
  }
  return s;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("invalid JSON in " + path.string() + ": " + e.what());
  }
}

LoadedScenario load_scenario(const std::filesystem::path& path, std::size_t grid_points_override) {
  return scenario_from_json(read_json_file(path), path.parent_path(), grid_points_override);
}

std::string config_hash(const Json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf.data(), 16);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace taskadc

// SPDX-License-Identifier: Apache-2.0
#include "taskadc/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "taskadc/config_search.hpp"
#include "taskadc/errors.hpp"
#include "taskadc/io.hpp"
#include "taskadc/simulator.hpp"

namespace taskadc::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string scenario;
  std::string out = ".";
  std::uint64_t seed = 0;
  std::size_t trials = kDefaultTrials;
  std::size_t grid_points = kDefaultGridPoints;
  std::vector<std::string> arch{"task"};
  bool simulate = false;
  bool dither = true;
  int k = 0;          // 0: min(N, M) for the task-based design
  double fs = 0.0;    // 0: the scenario's Nyquist rate
  int bits = 4;
  std::optional<double> eta;
  double t0 = 0.0;
  double oversample = kDefaultOversample;
  std::size_t block_samples = kDefaultBlockSamples;
  bool dump_trials = false;

  std::string var;
  double from = 0.0;
  double to = 0.0;
  int steps = 0;

  std::vector<double> budgets;
  std::vector<int> bit_depths;
  std::string averaging = "exact";
};

Json options_json(const std::string& command, const Options& o) {
  Json j{{"command", command},     {"scenario", o.scenario}, {"seed", o.seed},
         {"trials", o.trials},     {"grid_points", o.grid_points},
         {"arch", o.arch},         {"simulate", o.simulate}, {"dither", o.dither},
         {"K", o.k},               {"fs", o.fs},             {"b", o.bits},
         {"t0", o.t0},             {"oversample", o.oversample},
         {"block_samples", o.block_samples}};
  j["eta"] = o.eta ? Json(*o.eta) : Json(nullptr);
  if (command == "sweep") {
    j["var"] = o.var;
    j["from"] = o.from;
    j["to"] = o.to;
    j["steps"] = o.steps;
  }
  if (command == "rate-search") {
    j["budgets"] = o.budgets;
    j["bit_depths"] = o.bit_depths;
    j["averaging"] = o.averaging;
  }
  return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const Options& o) {
  const Json cfg = options_json(command, o);
  // Scenario contents are hashed too so that edits to the file change the hash.
  Json hashed = cfg;
  hashed["scenario_contents"] = read_json_file(o.scenario);
  const Json manifest{{"command", command},
                      {"config", cfg},
                      {"config_hash", config_hash(hashed)},
                      {"seed", o.seed},
                      {"grid_points", o.grid_points},
                      {"version", TASKADC_VERSION}};
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<Architecture> architectures(const Options& o) {
  std::vector<Architecture> a;
  for (const auto& s : o.arch) a.push_back(architecture_from_string(s));
  if (a.empty()) throw std::invalid_argument("--arch: at least one architecture required");
  return a;
}

int default_k(const TaskModel& m, const Options& o) {
  if (o.k > 0) return o.k;
  return static_cast<int>(std::min(m.n_task, m.m_inputs));
}

double nyquist(const TaskModel& m) { return 2.0 * m.f_max(); }

struct Point {
  int k;
  double fs;
  int bits;
  std::optional<double> eta;
  double t0;
};

FilterDesign design_at(const LoadedScenario& s, Architecture arch, const Point& p,
                       std::size_t grid_points) {
  const int k = architecture_adcs(arch, s.model, p.k);
  const AdcConfig cfg = make_config(k, p.fs, p.bits, p.eta);
  DesignOptions opt;
  opt.grid_points = grid_points;
  return shifted_task_design(s.model, p.t0, cfg, opt, arch);
}

SimulationReport simulate_design(const LoadedScenario& s, const FilterDesign& d, const Options& o) {
  SimulationRun run;
  run.scenario_id = s.id;
  run.model = s.model;
  run.design = d;
  run.n_trials = o.trials;
  run.oversample_factor = o.oversample;
  run.block_duration = static_cast<double>(o.block_samples) / run.grid_rate();
  run.seed = o.seed;
  run.dithered = o.dither;
  run.record_trials = o.dump_trials;
  return estimate_mse(run);
}

double feasible_fs(const LoadedScenario& s, double fs, const Options& o) {
  if (!o.simulate) return fs;
  return snap_sampling_rate(fs, o.oversample * nyquist(s.model));
}

std::string decile_summary(const FilterDesign& d) {
  if (d.sigma_h.empty()) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  const double lo = d.base_grid.f_lo;
  const double w = d.base_grid.width() / 10.0;
  for (int q = 0; q < 10; ++q) {
    double acc = 0.0;
    double tot = 0.0;
    for (std::size_t i = 0; i < d.base_grid.size(); ++i) {
      const int bin = std::min(9, static_cast<int>((d.base_grid.points[i] - lo) / w));
      if (bin != q) continue;
      acc += d.base_grid.weights[i] * static_cast<double>(d.active_modes(i));
      tot += d.base_grid.weights[i];
    }
    os << (q ? " " : "") << (tot > 0.0 ? acc / tot : 0.0);
  }
  return os.str();
}

std::string design_summary(const FilterDesign& d, Architecture arch) {
  std::ostringstream os;
  os << "architecture: " << to_string(arch) << "\n"
     << "K: " << d.cfg.k_adcs << "\n"
     << "fs: " << format_number(d.cfg.fs) << "\n"
     << "b: " << d.cfg.bits << "\n"
     << "eta: " << format_number(d.cfg.eta) << "\n"
     << "t0: " << format_number(d.t0) << "\n"
     << "alias_order: " << d.upsilon << "\n"
     << "zeta: " << format_number(d.zeta) << "\n"
     << "nmse: " << format_number(d.nmse) << "\n"
     << "active_modes_per_decile: " << decile_summary(d) << "\n";
  return os.str();
}

fs::path prepare_out(const Options& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

int cmd_design(const Options& o, bool force_simulate, std::ostream& out) {
  const LoadedScenario s = load_scenario(o.scenario, o.grid_points);
  const auto archs = architectures(o);
  if (archs.size() != 1) throw std::invalid_argument("design: exactly one --arch expected");
  Options opt = o;
  opt.simulate = o.simulate || force_simulate;
  const double fs0 = o.fs > 0.0 ? o.fs : nyquist(s.model);
  const Point p{default_k(s.model, o), feasible_fs(s, fs0, opt), o.bits, o.eta, o.t0};
  const FilterDesign d = design_at(s, archs.front(), p, o.grid_points);

  const fs::path dir = prepare_out(o);
  atomic_write(dir / "design.json", design_to_json(d).dump() + "\n");
  std::string summary = design_summary(d, archs.front());
  if (opt.simulate) {
    const SimulationReport r = simulate_design(s, d, opt);
    atomic_write(dir / "report.json", report_to_json(r).dump(2) + "\n");
    if (o.dump_trials) atomic_write(dir / "trials.csv", trials_csv(r));
    summary += "empirical_nmse: " + format_number(r.empirical_nmse) + " +- " +
               format_number(r.nmse_std_error) + "\n";
    summary += "overload_rate: " + format_number(r.overload_rate) + "\n";
  }
  atomic_write(dir / "summary.txt", summary);
  write_manifest(dir, force_simulate ? "simulate" : "design", opt);
  out << summary;
  return kExitOk;
}

std::vector<double> sweep_values(const Options& o) {
  if (o.steps < 1) throw std::invalid_argument("sweep: empty range (--steps must be >= 1)");
  std::vector<double> v;
  for (int i = 0; i < o.steps; ++i) {
    v.push_back(o.steps == 1 ? o.from
                             : o.from + (o.to - o.from) * static_cast<double>(i) / (o.steps - 1));
  }
  return v;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  static const std::vector<std::string> vars{"eta", "b", "K", "fs", "t0"};
  if (std::find(vars.begin(), vars.end(), o.var) == vars.end()) {
    throw std::invalid_argument("sweep: --var must be one of eta, b, K, fs, t0");
  }
  const auto values = sweep_values(o);
  const LoadedScenario s = load_scenario(o.scenario, o.grid_points);
  const auto archs = architectures(o);
  if (o.var == "K") {
    for (auto a : archs) {
      if (a != Architecture::task_based) {
        throw std::invalid_argument("sweep: K is fixed for " + to_string(a));
      }
    }
  }

  std::vector<std::string> header{o.var};
  if (o.simulate) header.push_back("fs_used");
  for (auto a : archs) {
    header.push_back(to_string(a) + "_nmse");
    if (o.simulate) {
      header.push_back(to_string(a) + "_empirical_nmse");
      header.push_back(to_string(a) + "_std_error");
    }
  }
  std::string csv = csv_line(header);
  const double fs0 = o.fs > 0.0 ? o.fs : nyquist(s.model);
  for (double v : values) {
    Point p{default_k(s.model, o), fs0, o.bits, o.eta, o.t0};
    std::string label = format_number(v);
    if (o.var == "eta") p.eta = v;
    if (o.var == "b") {
      p.bits = static_cast<int>(std::lround(v));
      label = std::to_string(p.bits);
    }
    if (o.var == "K") {
      p.k = static_cast<int>(std::lround(v));
      label = std::to_string(p.k);
    }
    if (o.var == "fs") p.fs = v;
    if (o.var == "t0") p.t0 = v;
    p.fs = feasible_fs(s, p.fs, o);

    std::vector<std::string> row{label};
    if (o.simulate) row.push_back(format_number(p.fs));
    for (auto a : archs) {
      const FilterDesign d = design_at(s, a, p, o.grid_points);
      row.push_back(format_number(d.nmse));
      if (o.simulate) {
        const SimulationReport r = simulate_design(s, d, o);
        row.push_back(format_number(r.empirical_nmse));
        row.push_back(format_number(r.nmse_std_error));
      }
    }
    csv += csv_line(row);
  }
  const fs::path dir = prepare_out(o);
  atomic_write(dir / ("sweep_" + o.var + ".csv"), csv);
  write_manifest(dir, "sweep", o);
  out << csv;
  return kExitOk;
}

int cmd_rate_search(const Options& o, std::ostream& out) {
  if (o.budgets.empty()) throw std::invalid_argument("rate-search: --budgets is required");
  for (double b : o.budgets) {
    if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("rate-search: budgets must be > 0");
  }
  if (o.averaging != "exact" && o.averaging != "midpoint") {
    throw std::invalid_argument("rate-search: --averaging must be exact or midpoint");
  }
  const LoadedScenario s = load_scenario(o.scenario, o.grid_points);
  const fs::path dir = prepare_out(o);
  std::string summary = csv_line({"budget", "architecture", "K", "b", "fs", "nmse", "nmse_t0_0"});
  Json all = Json::array();
  for (auto a : architectures(o)) {
    for (std::size_t i = 0; i < o.budgets.size(); ++i) {
      SearchSpec spec;
      spec.rate_budget = o.budgets[i];
      spec.arch = a;
      spec.grid_points = o.grid_points;
      spec.eta = o.eta;
      spec.averaging = o.averaging == "exact" ? TimeAveraging::exact : TimeAveraging::midpoint;
      if (o.k > 0) {
        for (int k = 1; k <= o.k; ++k) spec.k_range.push_back(k);
      }
      if (!o.bit_depths.empty()) spec.b_range = o.bit_depths;
      const SearchResult r = rate_search(s.model, spec);
      atomic_write(dir / ("rate_search_" + to_string(a) + "_" + std::to_string(i) + ".csv"),
                   search_table_csv(r));
      all.push_back(search_to_json(r));
      summary += csv_line({format_number(o.budgets[i]), to_string(a), std::to_string(r.best.k),
                           std::to_string(r.best.b), format_number(r.best.fs),
                           format_number(r.best.nmse), format_number(r.best.nmse_t0_0)});
    }
  }
  atomic_write(dir / "rate_search.csv", summary);
  atomic_write(dir / "rate_search.json", all.dump(2) + "\n");
  write_manifest(dir, "rate-search", o);
  out << summary;
  return kExitOk;
}

void add_common(CLI::App* c, Options& o) {
  c->add_option("--scenario", o.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  c->add_option("--out", o.out, "Output directory");
  c->add_option("--seed", o.seed, "Simulation seed");
  c->add_option("--trials", o.trials, "Monte-Carlo trials");
  c->add_option("--grid-points", o.grid_points, "Frequency grid points per base band");
  c->add_option("--arch", o.arch, "Architectures: task, analog, digital")
      ->delimiter(',')
      ->check(CLI::IsMember({"task", "analog", "digital", "task_based", "analog_recovery",
                             "digital_recovery"}));
  c->add_option("--simulate", o.simulate, "Run Monte-Carlo validation");
  c->add_option("--dither", o.dither, "Dither the quantizers");
  c->add_option("--K", o.k, "Number of ADCs (task-based)");
  c->add_option("--fs", o.fs, "Sampling rate in Hz (default: Nyquist rate)");
  c->add_option("--bits", o.bits, "Bits per sample");
  c->add_option("--eta", o.eta, "Loading factor (default: eta(b) schedule)");
  c->add_option("--t0", o.t0, "Task instant in seconds");
  c->add_option("--oversample", o.oversample, "Simulation grid rate over the Nyquist rate");
  c->add_option("--block-samples", o.block_samples, "Simulation block length in grid samples");
  c->add_flag("--dump-trials", o.dump_trials, "Write per-trial errors to trials.csv");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Task-based ADC design, simulation and rate search"};
  app.set_version_flag("--version", std::string(TASKADC_VERSION));
  app.require_subcommand(1);
  Options o;
  auto* design = app.add_subcommand("design", "Design the filter pair for one configuration");
  auto* simulate = app.add_subcommand("simulate", "Design and validate by Monte-Carlo simulation");
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter and tabulate nmse");
  auto* search = app.add_subcommand("rate-search", "Best (K, fs, b) under bit-rate budgets");
  for (auto* c : {design, simulate, sweep, search}) add_common(c, o);
  sweep->add_option("--var", o.var, "eta, b, K, fs or t0")->required();
  sweep->add_option("--from", o.from)->required();
  sweep->add_option("--to", o.to)->required();
  sweep->add_option("--steps", o.steps)->required();
  search->add_option("--budgets", o.budgets, "Comma-separated budgets in bits/s")
      ->delimiter(',')
      ->required();
  search->add_option("--bit-depths", o.bit_depths, "Comma-separated bit depths to search (default 1..16)")
      ->delimiter(',')
      ->check(CLI::Range(1, 32));
  search->add_option("--averaging", o.averaging, "exact or midpoint time averaging");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (design->parsed()) return cmd_design(o, false, out);
    if (simulate->parsed()) return cmd_design(o, true, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    if (search->parsed()) return cmd_rate_search(o, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Json::exception& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace taskadc::cli

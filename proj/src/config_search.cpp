// SPDX-License-Identifier: Apache-2.0
#include "taskadc/config_search.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "taskadc/errors.hpp"

namespace taskadc {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::task_based: return "task_based";
    case Architecture::analog_recovery: return "analog_recovery";
    case Architecture::digital_recovery: return "digital_recovery";
  }
  return "unknown";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "task" || s == "task_based") return Architecture::task_based;
  if (s == "analog" || s == "analog_recovery") return Architecture::analog_recovery;
  if (s == "digital" || s == "digital_recovery") return Architecture::digital_recovery;
  throw std::invalid_argument("unknown architecture: " + s);
}

int architecture_adcs(Architecture arch, const TaskModel& model, int k_task) {
  switch (arch) {
    case Architecture::analog_recovery: return static_cast<int>(model.n_task);
    case Architecture::digital_recovery: return static_cast<int>(model.m_inputs);
    case Architecture::task_based: break;
  }
  return k_task;
}

namespace {

Prefilter prefilter_of(Architecture arch) {
  return arch == Architecture::digital_recovery ? Prefilter::identity : Prefilter::task;
}

void check_adcs(const TaskModel& model, const AdcConfig& cfg, Architecture arch) {
  if (arch == Architecture::task_based) return;
  if (cfg.k_adcs != architecture_adcs(arch, model, cfg.k_adcs)) {
    throw std::invalid_argument("baseline: " + to_string(arch) + " needs K = " +
                                std::to_string(architecture_adcs(arch, model, cfg.k_adcs)));
  }
}

// Compression matrices at every base point, from gram when the design is
// task-based and the identity otherwise.
std::vector<CMatrix> compression_for(const TaskModel& model, const AdcConfig& cfg,
                                     Architecture arch, const detail::AliasSums& sums,
                                     int* rank_out) {
  const std::size_t n = sums.grid.size();
  if (arch != Architecture::task_based) {
    const Eigen::Index p = sums.gram.front().rows();
    if (rank_out) *rank_out = static_cast<int>(p);
    return std::vector<CMatrix>(n, CMatrix::Identity(p, p));
  }
  detail::ModeSet modes = detail::gram_modes(sums.gram);
  if (rank_out) *rank_out = detail::gram_rank(modes);
  const Eigen::Index mbar = (2 * sums.upsilon + 1) * model.m_inputs;
  auto d = detail::analog_core(sums.grid, modes, cfg, mbar, model.n_task).compression;
  detail::mirror_conjugate(sums, d);
  return d;
}

struct Loaded {
  std::vector<CMatrix> hh;
  std::vector<CMatrix> s;
};

Loaded load(const detail::AliasSums& sums, const std::vector<CMatrix>& d) {
  Loaded l;
  l.hh.resize(d.size());
  l.s.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    l.hh[i] = d[i] * sums.gram[i] * d[i].adjoint();
    l.s[i] = sums.cross[i] * d[i].adjoint();
  }
  return l;
}

struct CellValue {
  int rank = 0;
  double nmse_t0_0 = 0.0;
  double nmse_avg = 0.0;
};

// One pass over the alias sums gives both the t0 = 0 and the averaged nmse.
CellValue evaluate_cell(const TaskModel& model, const AdcConfig& cfg, Architecture arch,
                        std::size_t grid_points, bool stop_above_rank) {
  CellValue v;
  const auto sums = detail::alias_sums(model, prefilter_of(arch), cfg.fs, grid_points, 0.0, true);
  if (stop_above_rank && arch == Architecture::task_based) {
    v.rank = detail::gram_rank(detail::gram_modes(sums.gram));
    if (cfg.k_adcs > v.rank) return v;
  }
  const auto d = compression_for(model, cfg, arch, sums, stop_above_rank ? nullptr : &v.rank);
  const Loaded l = load(sums, d);
  auto p = detail::prop1(sums.grid, cfg.fs, l.hh, l.s, sums.energy, cfg, false);
  if (!(p.energy > 0.0)) throw std::invalid_argument("evaluate: task carries no energy");
  if (prefilter_of(arch) == Prefilter::task && p.delta > 0.0) {
    p.mse = detail::task_prefilter_mse(sums.grid, cfg.fs, sums.gram, d, p.delta);
  }
  v.nmse_t0_0 = p.mse / p.energy;
  // Without aliasing every instant is equivalent.
  if (sums.upsilon == 0) {
    v.nmse_avg = v.nmse_t0_0;
    return v;
  }

  const double ts = cfg.ts();
  const double q = 0.25 * p.delta * p.delta;
  double captured = 0.0;
  if (q > 0.0) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      CMatrix cz = ts * l.hh[i];
      cz.diagonal().array() += q;
      Eigen::LLT<CMatrix> llt(cz);
      if (llt.info() != Eigen::Success) throw NumericalError("evaluate: C_z is not positive definite");
      // Sum over aliases of tr(C_z^{-1} D Q^H Q D^H), taken as || L^{-1} D Q^H ||_F^2
      // without forming Q^H Q, which would square the conditioning.
      CMatrix f = d[i] * sums.cross_stack[i].adjoint();
      llt.matrixL().solveInPlace(f);
      captured += sums.grid.weights[i] * ts * f.squaredNorm();
    }
  }
  v.nmse_avg = (p.energy - captured) / p.energy;
  return v;
}

SpectralMatrixFunction identity_response(const TaskModel& model) {
  SpectralMatrixFunction r;
  r.grid = model.c_x.grid;
  r.rows = model.m_inputs;
  r.cols = model.m_inputs;
  r.kind = SpectrumKind::filter;
  r.values.assign(r.grid.size(), CMatrix::Identity(r.rows, r.cols));
  return r;
}

}  // namespace

FilterDesign baseline_design(const TaskModel& model, const AdcConfig& cfg, Architecture arch,
                             const DesignOptions& opt) {
  if (arch == Architecture::task_based) return design_task_based(model, cfg, opt);
  cfg.validate();
  model.validate();
  check_adcs(model, cfg, arch);
  const auto sums = detail::alias_sums(model, prefilter_of(arch), cfg.fs, opt.grid_points);
  const auto d = compression_for(model, cfg, arch, sums, nullptr);
  const Loaded l = load(sums, d);
  auto p = detail::prop1(sums.grid, cfg.fs, l.hh, l.s, sums.energy, cfg, opt.keep_filters);
  if (prefilter_of(arch) == Prefilter::task && p.delta > 0.0) {
    p.mse = detail::task_prefilter_mse(sums.grid, cfg.fs, sums.gram, d, p.delta);
  }

  FilterDesign out;
  out.cfg = cfg;
  out.base_grid = sums.grid;
  out.upsilon = sums.upsilon;
  out.n_task = model.n_task;
  out.compression = d;
  out.prefilter = prefilter_of(arch);
  out.mse_theory = p.mse;
  out.task_energy = p.energy;
  out.nmse = p.energy > 0.0 ? p.mse / p.energy : 0.0;
  out.gamma_q = p.gamma;
  out.delta = p.delta;
  if (opt.keep_filters) {
    out.g_freq.grid = sums.grid;
    out.g_freq.kind = SpectrumKind::filter;
    out.g_freq.rows = model.n_task;
    out.g_freq.cols = cfg.k_adcs;
    out.g_freq.values = std::move(p.g);
    out.prefilter_response =
        arch == Architecture::analog_recovery ? model.gamma : identity_response(model);
    out.h = *out.prefilter_response;
  }
  return out;
}

FilterDesign shifted_task_design(const TaskModel& model, double t0, const AdcConfig& cfg,
                                 const DesignOptions& opt, Architecture arch) {
  if (!std::isfinite(t0)) throw std::invalid_argument("shifted design: t0 must be finite");
  DesignOptions base_opt = opt;
  base_opt.keep_stacked = false;
  FilterDesign d = baseline_design(model, cfg, arch, base_opt);
  if (t0 == 0.0) return d;
  const auto sums = detail::alias_sums(model, prefilter_of(arch), cfg.fs, opt.grid_points, t0);
  const Loaded l = load(sums, d.compression);
  auto p = detail::prop1(sums.grid, cfg.fs, l.hh, l.s, sums.energy, cfg, opt.keep_filters);
  d.t0 = t0;
  d.mse_theory = p.mse;
  d.nmse = p.energy > 0.0 ? p.mse / p.energy : 0.0;
  if (opt.keep_filters) d.g_freq.values = std::move(p.g);
  return d;
}

double time_averaged_nmse(const TaskModel& model, const AdcConfig& cfg, std::size_t n_t0,
                          std::size_t grid_points, Architecture arch) {
  if (n_t0 < 1) throw std::invalid_argument("time_averaged_nmse: need at least one instant");
  DesignOptions opt;
  opt.grid_points = grid_points;
  opt.keep_filters = false;
  const FilterDesign base = baseline_design(model, cfg, arch, opt);
  double acc = 0.0;
  for (std::size_t j = 0; j < n_t0; ++j) {
    const double t0 = (static_cast<double>(j) + 0.5) / static_cast<double>(n_t0) * cfg.ts();
    const auto sums = detail::alias_sums(model, prefilter_of(arch), cfg.fs, grid_points, t0);
    const Loaded l = load(sums, base.compression);
    const auto p = detail::prop1(sums.grid, cfg.fs, l.hh, l.s, sums.energy, cfg, false);
    acc += p.mse / p.energy;
  }
  return acc / static_cast<double>(n_t0);
}

double time_averaged_nmse_exact(const TaskModel& model, const AdcConfig& cfg,
                                std::size_t grid_points, Architecture arch) {
  cfg.validate();
  model.validate();
  check_adcs(model, cfg, arch);
  if (arch == Architecture::task_based && cfg.k_adcs > model.m_inputs) {
    throw std::invalid_argument("design: K must not exceed M");
  }
  return evaluate_cell(model, cfg, arch, grid_points, false).nmse_avg;
}

double converged_time_average(const TaskModel& model, const AdcConfig& cfg, std::size_t n_t0,
                              double rel_tol, std::size_t max_points, std::size_t grid_points,
                              Architecture arch) {
  double prev = time_averaged_nmse(model, cfg, n_t0, grid_points, arch);
  while (2 * n_t0 <= max_points) {
    n_t0 *= 2;
    const double cur = time_averaged_nmse(model, cfg, n_t0, grid_points, arch);
    if (std::abs(cur - prev) <= rel_tol * std::abs(cur)) return cur;
    prev = cur;
  }
  return prev;
}

SearchResult rate_search(const TaskModel& model, const SearchSpec& spec) {
  model.validate();
  if (!(spec.rate_budget > 0.0) || !std::isfinite(spec.rate_budget)) {
    throw std::invalid_argument("rate_search: budget must be > 0");
  }
  std::vector<int> ks = spec.k_range;
  if (spec.arch != Architecture::task_based) {
    ks = {architecture_adcs(spec.arch, model, 0)};
  } else if (ks.empty()) {
    for (int k = 1; k <= static_cast<int>(model.n_task); ++k) ks.push_back(k);
  }
  std::vector<int> bs = spec.b_range;
  if (bs.empty()) {
    for (int b = 1; b <= 16; ++b) bs.push_back(b);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  if (ks.front() < 1 || bs.front() < 1) throw std::invalid_argument("rate_search: K and b must be >= 1");

  SearchResult res;
  res.arch = spec.arch;
  res.rate_budget = spec.rate_budget;
  bool found = false;
  for (int k : ks) {
    for (int b : bs) {
      SearchEntry e;
      e.k = k;
      e.b = b;
      e.fs = spec.rate_budget / (static_cast<double>(k) * static_cast<double>(b));
      AdcConfig cfg;
      try {
        cfg = make_config(k, e.fs, b, spec.eta);
      } catch (const std::invalid_argument&) {
        res.table.push_back(e);
        continue;
      }
      if (spec.arch == Architecture::task_based && k > model.m_inputs) {
        res.table.push_back(e);
        continue;
      }
      const CellValue v = evaluate_cell(model, cfg, spec.arch, spec.grid_points, true);
      if (spec.arch == Architecture::task_based && k > v.rank) {
        res.table.push_back(e);
        continue;
      }
      e.evaluated = true;
      e.nmse_t0_0 = v.nmse_t0_0;
      e.nmse = spec.averaging == TimeAveraging::exact
                   ? v.nmse_avg
                   : time_averaged_nmse(model, cfg, spec.n_t0, spec.grid_points, spec.arch);
      res.table.push_back(e);

      // Ties go to fewer ADCs, then to more bits.
      if (!found) {
        res.best = e;
        found = true;
        continue;
      }
      const double tol = 1e-12 * std::max(std::abs(res.best.nmse), std::abs(e.nmse));
      const bool better = e.nmse < res.best.nmse - tol;
      const bool tie = std::abs(e.nmse - res.best.nmse) <= tol;
      if (better || (tie && e.k == res.best.k && e.b > res.best.b)) res.best = e;
    }
  }
  if (!found) throw std::invalid_argument("rate_search: no feasible configuration");
  return res;
}

std::optional<double> minimum_budget(const TaskModel& model, SearchSpec spec, double target,
                                     double r_lo, double r_hi, double rel_tol) {
  if (!(r_lo > 0.0) || !(r_hi > r_lo)) throw std::invalid_argument("minimum_budget: bad bracket");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("minimum_budget: tolerance must be > 0");
  auto reaches = [&](double r) {
    spec.rate_budget = r;
    return rate_search(model, spec).best.nmse <= target;
  };
  if (reaches(r_lo)) return r_lo;
  // The best nmse need not be monotone in R, so walk up from r_lo to the
  // first budget that reaches the target before bisecting.
  const double step = std::pow(10.0, 1.0 / 8.0);
  double lo = r_lo;
  double hi = r_lo;
  for (;;) {
    if (hi >= r_hi) return std::nullopt;
    lo = hi;
    hi = std::min(hi * step, r_hi);
    if (reaches(hi)) break;
  }
  while (hi / lo > 1.0 + rel_tol) {
    const double mid = std::sqrt(lo * hi);
    if (reaches(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace taskadc

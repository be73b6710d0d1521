// SPDX-License-Identifier: Apache-2.0
#include "taskadc/filter_design.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "taskadc/errors.hpp"

namespace taskadc {

void AdcConfig::validate() const {
  if (k_adcs < 1) throw std::invalid_argument("config: K must be >= 1");
  if (bits < 1 || bits > 30) throw std::invalid_argument("config: bits must be in [1, 30]");
  if (!(fs > 0.0) || !std::isfinite(fs)) throw std::invalid_argument("config: fs must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("config: eta must be > 0");
  kappa_bar(eta, bits);
}

AdcConfig make_config(int k_adcs, double fs, int bits, std::optional<double> eta) {
  AdcConfig c;
  c.k_adcs = k_adcs;
  c.fs = fs;
  c.bits = bits;
  c.eta = eta ? *eta : eta_schedule(bits);
  c.validate();
  return c;
}

CMatrix FilterDesign::analog_response(double f) const {
  if (!prefilter_response) throw std::logic_error("analog_response: design has no prefilter");
  const CMatrix* p = prefilter_response->find(f);
  if (p == nullptr) return CMatrix::Zero(cfg.k_adcs, prefilter_response->cols);
  auto idx = base_grid.locate(wrap_to_baseband(f, cfg.fs));
  if (!idx) return CMatrix::Zero(cfg.k_adcs, prefilter_response->cols);
  return compression[*idx] * (*p);
}

std::size_t FilterDesign::active_modes(std::size_t i) const {
  if (i >= sigma_h.size()) return 0;
  return static_cast<std::size_t>((sigma_h[i].array() > 0.0).count());
}

QuantizerSpec FilterDesign::quantizer(bool dithered) const {
  return QuantizerSpec::make(cfg.bits, gamma_q, dithered);
}

namespace {

double global_sigma_max(const std::vector<Eigen::VectorXd>& s) {
  double m = 0.0;
  for (const auto& v : s) {
    if (v.size() > 0) m = std::max(m, v.maxCoeff());
  }
  return m;
}

// Index of the first entry whose magnitude is within round-off of the largest;
// the tolerance keeps the choice stable between numerically equivalent routes.
template <class Get>
cplx gauge_phase(Eigen::Index len, Get get) {
  double best = 0.0;
  for (Eigen::Index p = 0; p < len; ++p) best = std::max(best, std::abs(get(p)));
  if (best == 0.0) return 1.0;
  for (Eigen::Index p = 0; p < len; ++p) {
    const cplx v = get(p);
    if (std::abs(v) >= (1.0 - 1e-9) * best) return std::conj(v) / std::abs(v);
  }
  return 1.0;
}

}  // namespace

double solve_waterfill_level(const std::vector<Eigen::VectorXd>& singvals, const FrequencyGrid& grid,
                             const AdcConfig& cfg, Eigen::Index mbar_cols) {
  cfg.validate();
  if (singvals.size() != grid.size()) {
    throw std::invalid_argument("solve_waterfill_level: one singular-value set per grid point");
  }
  const double smax = global_sigma_max(singvals);
  if (!(smax > 0.0)) {
    throw std::invalid_argument("solve_waterfill_level: all singular values vanish");
  }
  const double thresh = 1e-12 * smax;
  const Eigen::Index cap = std::min<Eigen::Index>(cfg.k_adcs, mbar_cols);

  std::vector<std::pair<double, double>> sw;  // (sigma, weight)
  for (std::size_t i = 0; i < singvals.size(); ++i) {
    const Eigen::Index r = std::min<Eigen::Index>(cap, singvals[i].size());
    for (Eigen::Index j = 0; j < r; ++j) {
      if (singvals[i](j) >= thresh) sw.emplace_back(singvals[i](j), grid.weights[i]);
    }
  }
  std::stable_sort(sw.begin(), sw.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  // c * sum_j w_j (zeta sigma_j - 1)^+ = 1 is piecewise linear in zeta with
  // kinks at 1/sigma_j; walk the kinks and solve on the active segment.
  const double c = kappa_bar(cfg.eta, cfg.bits) * cfg.ts() /
                   (static_cast<double>(cfg.k_adcs) * std::ldexp(1.0, 2 * cfg.bits));
  double a = 0.0;
  double b = 0.0;
  double zeta = 0.0;
  for (std::size_t m = 0; m < sw.size(); ++m) {
    a += sw[m].second * sw[m].first;
    b += sw[m].second;
    zeta = (1.0 / c + b) / a;
    if (m + 1 == sw.size() || zeta * sw[m + 1].first <= 1.0) break;
  }

  double lhs = 0.0;
  for (const auto& [s, w] : sw) lhs += w * std::max(zeta * s - 1.0, 0.0);
  lhs *= c;
  if (!(std::abs(lhs - 1.0) <= 1e-10)) {
    throw NumericalError("solve_waterfill_level: constraint residual too large");
  }
  return zeta;
}

CMatrix equalize_diagonal(const CMatrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("equalize_diagonal: matrix must be square");
  const double scale = std::max(a.norm(), 1e-300);
  if ((a - a.adjoint()).norm() > 1e-10 * scale) {
    throw std::invalid_argument("equalize_diagonal: matrix is not Hermitian");
  }
  const Eigen::Index k = a.rows();
  CMatrix u = CMatrix::Identity(k, k);
  if (k <= 1) return u;
  CMatrix m = 0.5 * (a + a.adjoint());
  const double target = m.trace().real() / static_cast<double>(k);
  const double tol = 1e-15 * std::max(std::abs(m.trace().real()), 1e-300);

  std::vector<Eigen::Index> open(static_cast<std::size_t>(k));
  std::iota(open.begin(), open.end(), 0);
  for (Eigen::Index step = 0; step + 1 < k; ++step) {
    auto [lo_it, hi_it] = std::minmax_element(open.begin(), open.end(), [&](auto x, auto y) {
      return m(x, x).real() < m(y, y).real();
    });
    const Eigen::Index i = *hi_it;
    const Eigen::Index j = *lo_it;
    const double di = m(i, i).real();
    const double dj = m(j, j).real();
    if (di - target <= tol && target - dj <= tol) break;

    // Rotation in the (i, j) plane that lands entry i exactly on the target;
    // the phase cancels the cross term so the new entry is a convex mix.
    const double s2 = std::clamp((di - target) / (di - dj), 0.0, 1.0);
    const double c = std::sqrt(1.0 - s2);
    const cplx aij = m(i, j);
    const double phi = std::abs(aij) > 0.0 ? std::arg(aij) + 0.5 * std::numbers::pi : 0.0;
    const cplx s = std::polar(std::sqrt(s2), phi);

    CMatrix g = CMatrix::Identity(k, k);
    g(i, i) = c;
    g(i, j) = s;
    g(j, i) = -std::conj(s);
    g(j, j) = c;
    m = g * m * g.adjoint();
    u = g * u;
    open.erase(std::find(open.begin(), open.end(), i));
  }
  return u;
}

namespace detail {

AnalogCore analog_core(const FrequencyGrid& grid, const ModeSet& modes, const AdcConfig& cfg,
                       Eigen::Index mbar_cols, Eigen::Index n_task) {
  AnalogCore core;
  core.zeta = solve_waterfill_level(modes.sigma, grid, cfg, mbar_cols);
  const Eigen::Index k = cfg.k_adcs;
  const double thresh = 1e-12 * global_sigma_max(modes.sigma);
  const double scale = std::ldexp(1.0, -cfg.bits);
  const Eigen::Index cap = std::min<Eigen::Index>(k, mbar_cols);

  const std::size_t n = grid.size();
  core.sigma_h.resize(n);
  core.u_h.resize(n);
  core.compression.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd& sg = modes.sigma[i];
    const Eigen::Index r = std::min<Eigen::Index>(cap, sg.size());
    Eigen::VectorXd sh = Eigen::VectorXd::Zero(k);
    CMatrix e = CMatrix::Zero(k, n_task);
    for (Eigen::Index j = 0; j < r; ++j) {
      if (sg(j) < thresh) continue;
      const double x = core.zeta * sg(j) - 1.0;
      if (x <= 0.0) continue;
      sh(j) = scale * std::sqrt(x);
      e.row(j) = (sh(j) / sg(j)) * modes.u[i].col(j).adjoint();
    }
    CMatrix a = CMatrix::Zero(k, k);
    a.diagonal() = sh.array().square().matrix().cast<cplx>();
    core.u_h[i] = equalize_diagonal(a);
    core.compression[i] = core.u_h[i] * e;
    core.sigma_h[i] = std::move(sh);
  }
  return core;
}

double implied_delta(const FrequencyGrid& grid, double fs, const std::vector<CMatrix>& hh,
                     const AdcConfig& cfg, double* gamma_out) {
  const double ts = 1.0 / fs;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(hh.empty() ? 0 : hh.front().rows());
  for (std::size_t i = 0; i < hh.size(); ++i) diag += grid.weights[i] * hh[i].diagonal().real();
  const double max_var = diag.size() > 0 ? ts * ts * diag.maxCoeff() : 0.0;
  const double gamma = calibrate_dynamic_range(std::max(max_var, 0.0), cfg.eta, cfg.bits);
  if (gamma_out) *gamma_out = gamma;
  return 2.0 * gamma / std::ldexp(1.0, cfg.bits);
}

Prop1 prop1(const FrequencyGrid& grid, double fs, const std::vector<CMatrix>& hh,
            const std::vector<CMatrix>& s, const std::vector<double>& energy, const AdcConfig& cfg,
            bool keep_g) {
  const std::size_t n = grid.size();
  if (hh.size() != n || s.size() != n || energy.size() != n) {
    throw std::invalid_argument("prop1: per-point inputs must match the grid");
  }
  Prop1 out;
  for (std::size_t i = 0; i < n; ++i) out.energy += grid.weights[i] * energy[i];
  out.delta = implied_delta(grid, fs, hh, cfg, &out.gamma);
  const double ts = 1.0 / fs;
  const double q = 0.25 * out.delta * out.delta;
  const Eigen::Index k = hh.front().rows();
  const Eigen::Index nt = s.front().rows();
  if (keep_g) out.g.assign(n, CMatrix::Zero(nt, k));

  double captured = 0.0;
  if (q > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      CMatrix cz = ts * hh[i];
      cz.diagonal().array() += q;
      Eigen::LLT<CMatrix> llt(cz);
      if (llt.info() != Eigen::Success) throw NumericalError("prop1: C_z is not positive definite");
      // tr(S C_z^{-1} S^H) = || L^{-1} S^H ||_F^2
      CMatrix w = s[i].adjoint();
      llt.matrixL().solveInPlace(w);
      captured += grid.weights[i] * ts * w.squaredNorm();
      if (keep_g) {
        llt.matrixU().solveInPlace(w);  // C_z^{-1} S^H
        out.g[i] = w.adjoint();
      }
    }
  } else {
    // Zero loading only happens for H_bar = 0, where nothing reaches the ADCs.
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i].norm() > 0.0) throw NumericalError("prop1: singular C_z with non-zero cross term");
    }
  }
  out.mse = out.energy - captured;
  return out;
}

double task_prefilter_mse(const FrequencyGrid& grid, double fs, const std::vector<CMatrix>& gram,
                          const std::vector<CMatrix>& d, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("task_prefilter_mse: delta must be > 0");
  const double scale = 4.0 / (fs * delta * delta);
  double mse = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CMatrix a = psd_sqrt(gram[i]);
    const CMatrix b = d[i] * a;
    CMatrix m = scale * (b.adjoint() * b);
    m.diagonal().array() += 1.0;
    Eigen::LLT<CMatrix> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError("task_prefilter_mse: factorization failed");
    CMatrix x = a;
    llt.matrixL().solveInPlace(x);
    mse += grid.weights[i] * x.squaredNorm();
  }
  return mse;
}

namespace {

struct CellTables {
  std::vector<CMatrix> gram;
  std::vector<CMatrix> q;
  std::vector<double> energy;
};

CellTables cell_tables(const TaskModel& model, Prefilter prefilter) {
  const std::size_t nc = model.c_x.values.size();
  CellTables t;
  t.gram.resize(nc);
  t.q.resize(nc);
  t.energy.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const CMatrix& g = model.gamma.values[c];
    const CMatrix gc = g * model.c_x.values[c];
    if (prefilter == Prefilter::task) {
      t.q[c] = gc * g.adjoint();
      t.gram[c] = t.q[c];
    } else {
      t.q[c] = gc;
      t.gram[c] = model.c_x.values[c];
    }
    t.energy[c] = (gc * g.adjoint()).trace().real();
  }
  return t;
}

}  // namespace

AliasSums alias_sums(const TaskModel& model, Prefilter prefilter, double fs, std::size_t n_points,
                     double t0, bool with_cross_stack) {
  AliasSums a;
  a.fs = fs;
  a.grid = baseband_grid(fs, model.f_max(), n_points);
  a.upsilon = alias_order(fs, model.f_max());
  const CellTables t = cell_tables(model, prefilter);
  const Eigen::Index p = prefilter == Prefilter::task ? model.n_task : model.m_inputs;
  const Eigen::Index nt = model.n_task;
  const std::size_t n = a.grid.size();
  a.gram.assign(n, CMatrix::Zero(p, p));
  a.cross.assign(n, CMatrix::Zero(nt, p));
  a.energy.assign(n, 0.0);
  if (with_cross_stack) a.cross_stack.assign(n, CMatrix::Zero(0, p));
  const FrequencyGrid& src = model.c_x.grid;
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < n; ++i) {
    const double f0 = a.grid.points[i];
    hits.clear();
    for (int k = -a.upsilon; k <= a.upsilon; ++k) {
      const double f = f0 - k * fs;
      auto c = src.locate(f);
      if (!c) continue;
      hits.push_back(*c);
      a.gram[i] += t.gram[*c];
      if (t0 == 0.0) {
        a.cross[i] += t.q[*c];
      } else {
        a.cross[i] += std::polar(1.0, -2.0 * std::numbers::pi * f * t0) * t.q[*c];
      }
      a.energy[i] += t.energy[*c];
    }
    if (with_cross_stack) {
      // Aliases that land in the same source cell share one block scaled by
      // the square root of their count.
      std::sort(hits.begin(), hits.end());
      std::vector<std::pair<std::size_t, double>> cells;
      for (std::size_t c : hits) {
        if (!cells.empty() && cells.back().first == c) {
          cells.back().second += 1.0;
        } else {
          cells.emplace_back(c, 1.0);
        }
      }
      CMatrix& st = a.cross_stack[i];
      st.resize(static_cast<Eigen::Index>(cells.size()) * nt, p);
      for (std::size_t j = 0; j < cells.size(); ++j) {
        st.middleRows(static_cast<Eigen::Index>(j) * nt, nt) =
            std::sqrt(cells[j].second) * t.q[cells[j].first];
      }
    }
  }
  return a;
}

ModeSet gram_modes(const std::vector<CMatrix>& gram) {
  ModeSet modes;
  modes.sigma.resize(gram.size());
  modes.u.resize(gram.size());
  for (std::size_t i = 0; i < gram.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(gram[i]);
    if (es.info() != Eigen::Success) throw NumericalError("design: eigendecomposition failed");
    modes.sigma[i] = es.eigenvalues().reverse().cwiseMax(0.0).cwiseSqrt();
    modes.u[i] = es.eigenvectors().rowwise().reverse();
  }
  return modes;
}

bool mirror_conjugate(const AliasSums& sums, std::vector<CMatrix>& d) {
  const std::size_t n = sums.grid.size();
  if (d.size() != n || !sums.grid.symmetric()) return false;
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t j = n - 1 - i;
    const double scale = std::max(sums.gram[j].norm(), 1e-300);
    if ((sums.gram[i] - sums.gram[j].conjugate()).norm() > 1e-9 * scale) return false;
  }
  for (std::size_t i = 0; i < n / 2; ++i) d[i] = d[n - 1 - i].conjugate();
  return true;
}

int gram_rank(const ModeSet& modes) {
  const double smax = global_sigma_max(modes.sigma);
  if (!(smax > 0.0)) return 0;
  // Gram eigenvalues carry absolute round-off near 1e-16 lambda_max, so the
  // threshold sits above that level instead of at (1e-10)^2.
  const double thresh = 1e-13 * smax * smax;
  int best = 0;
  for (const auto& s : modes.sigma) {
    best = std::max(best, static_cast<int>((s.array().square() > thresh).count()));
  }
  return best;
}

}  // namespace detail

namespace {

FilterDesign finish_common(const AdcConfig& cfg, const FrequencyGrid& grid, int upsilon,
                           Eigen::Index n_task, detail::ModeSet&& modes,
                           detail::AnalogCore&& core) {
  FilterDesign d;
  d.cfg = cfg;
  d.base_grid = grid;
  d.upsilon = upsilon;
  d.n_task = n_task;
  d.zeta = core.zeta;
  d.sigma_gamma = std::move(modes.sigma);
  d.sigma_h = std::move(core.sigma_h);
  d.compression = std::move(core.compression);
  d.prefilter = Prefilter::task;
  return d;
}

SpectralMatrixFunction on_base_grid(const FrequencyGrid& grid, std::vector<CMatrix>&& values) {
  SpectralMatrixFunction g;
  g.grid = grid;
  g.kind = SpectrumKind::filter;
  g.rows = values.empty() ? 0 : values.front().rows();
  g.cols = values.empty() ? 0 : values.front().cols();
  g.values = std::move(values);
  return g;
}

void check_same_base(const StackedSpectrum& a, const StackedSpectrum& b) {
  if (a.base_grid.points != b.base_grid.points || a.fs != b.fs) {
    throw std::invalid_argument("stacked spectra must share base grid and sampling rate");
  }
  if (a.cols() != b.cols()) throw std::invalid_argument("stacked spectra column counts differ");
}

}  // namespace

FilterDesign design_analog_filter(const StackedSpectrum& gamma_bar, const AdcConfig& cfg) {
  cfg.validate();
  if (cfg.k_adcs > gamma_bar.block_cols) {
    throw std::invalid_argument("design_analog_filter: K must not exceed M");
  }
  const std::size_t n = gamma_bar.blocks.size();
  detail::ModeSet modes;
  modes.sigma.resize(n);
  modes.u.resize(n);
  std::vector<CMatrix> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::JacobiSVD<CMatrix> svd(gamma_bar.blocks[i], Eigen::ComputeThinU | Eigen::ComputeThinV);
    modes.sigma[i] = svd.singularValues();
    modes.u[i] = svd.matrixU();
    v[i] = svd.matrixV();
    for (Eigen::Index j = 0; j < v[i].cols(); ++j) {
      const cplx ph = gauge_phase(v[i].rows(), [&](Eigen::Index p) { return v[i](p, j); });
      v[i].col(j) *= ph;
      modes.u[i].col(j) *= ph;
    }
  }
  auto core = detail::analog_core(gamma_bar.base_grid, modes, cfg, gamma_bar.cols(),
                                  gamma_bar.rows());

  StackedSpectrum h_bar;
  h_bar.base_grid = gamma_bar.base_grid;
  h_bar.fs = gamma_bar.fs;
  h_bar.upsilon = gamma_bar.upsilon;
  h_bar.block_cols = gamma_bar.block_cols;
  h_bar.blocks.resize(n);
  const Eigen::Index k = cfg.k_adcs;
  for (std::size_t i = 0; i < n; ++i) {
    CMatrix hb = CMatrix::Zero(k, gamma_bar.cols());
    const Eigen::Index r = std::min<Eigen::Index>(k, v[i].cols());
    for (Eigen::Index j = 0; j < r; ++j) {
      if (core.sigma_h[i](j) > 0.0) {
        hb += core.u_h[i].col(j) * (core.sigma_h[i](j) * v[i].col(j).adjoint());
      }
    }
    h_bar.blocks[i] = std::move(hb);
  }
  FilterDesign d = finish_common(cfg, gamma_bar.base_grid, gamma_bar.upsilon, gamma_bar.rows(),
                                 std::move(modes), std::move(core));
  d.task_energy = task_energy(gamma_bar);
  d.h_bar = std::move(h_bar);
  return d;
}

FilterDesign design_filters(const StackedSpectrum& gamma_bar, const AdcConfig& cfg) {
  FilterDesign d = design_analog_filter(gamma_bar, cfg);
  d.g_freq = design_digital_filter(*d.h_bar, gamma_bar, cfg);
  const MseResult r = theoretical_mse(*d.h_bar, gamma_bar, cfg);
  d.mse_theory = r.mse;
  d.nmse = r.nmse;
  d.task_energy = r.task_energy;
  d.gamma_q = r.gamma;
  d.delta = r.delta;
  return d;
}

SpectralMatrixFunction nyquist_analog_filter(const FilterDesign& design,
                                             const SpectralMatrixFunction& c_x) {
  if (design.upsilon != 0) {
    throw std::invalid_argument("nyquist_analog_filter: sampling rate aliases the input band");
  }
  if (!design.h_bar) throw std::invalid_argument("nyquist_analog_filter: design has no H_bar");
  SpectralMatrixFunction h;
  h.grid = c_x.grid;
  h.rows = design.cfg.k_adcs;
  h.cols = c_x.cols;
  h.kind = SpectrumKind::filter;
  h.values.resize(c_x.values.size());
  for (std::size_t i = 0; i < c_x.values.size(); ++i) {
    const double f = c_x.grid.points[i];
    auto idx = design.base_grid.locate(f);
    if (!idx) {
      h.values[i] = CMatrix::Zero(h.rows, h.cols);
      continue;
    }
    h.values[i] = design.h_bar->blocks[*idx] * pinv(psd_sqrt(c_x.values[i]), 1e-12);
  }
  return h;
}

namespace {

void stacked_products(const StackedSpectrum& h_bar, const StackedSpectrum& gamma_bar,
                      std::vector<CMatrix>& hh, std::vector<CMatrix>& s, std::vector<double>& e) {
  check_same_base(h_bar, gamma_bar);
  const std::size_t n = h_bar.blocks.size();
  hh.resize(n);
  s.resize(n);
  e.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    hh[i] = h_bar.blocks[i] * h_bar.blocks[i].adjoint();
    s[i] = gamma_bar.blocks[i] * h_bar.blocks[i].adjoint();
    e[i] = gamma_bar.blocks[i].squaredNorm();
  }
}

}  // namespace

SpectralMatrixFunction design_digital_filter(const StackedSpectrum& h_bar,
                                             const StackedSpectrum& gamma_bar,
                                             const AdcConfig& cfg) {
  std::vector<CMatrix> hh, s;
  std::vector<double> e;
  stacked_products(h_bar, gamma_bar, hh, s, e);
  auto p = detail::prop1(h_bar.base_grid, h_bar.fs, hh, s, e, cfg, true);
  return on_base_grid(h_bar.base_grid, std::move(p.g));
}

MseResult theoretical_mse(const StackedSpectrum& h_bar, const StackedSpectrum& gamma_bar,
                          const AdcConfig& cfg) {
  std::vector<CMatrix> hh, s;
  std::vector<double> e;
  stacked_products(h_bar, gamma_bar, hh, s, e);
  auto p = detail::prop1(h_bar.base_grid, h_bar.fs, hh, s, e, cfg, false);
  MseResult r;
  r.mse = p.mse;
  r.task_energy = p.energy;
  r.nmse = p.energy > 0.0 ? p.mse / p.energy : 0.0;
  r.gamma = p.gamma;
  r.delta = p.delta;
  return r;
}

double diagonal_form_mse(const FilterDesign& d) {
  const double floor_var = std::ldexp(1.0, -2 * d.cfg.bits);
  double captured = 0.0;
  for (std::size_t i = 0; i < d.base_grid.size(); ++i) {
    const Eigen::Index r = std::min(d.sigma_h[i].size(), d.sigma_gamma[i].size());
    double acc = 0.0;
    for (Eigen::Index j = 0; j < r; ++j) {
      const double s2 = d.sigma_h[i](j) * d.sigma_h[i](j);
      if (s2 <= 0.0) continue;
      const double g2 = d.sigma_gamma[i](j) * d.sigma_gamma[i](j);
      acc += g2 * s2 / (s2 + floor_var);
    }
    captured += d.base_grid.weights[i] * acc;
  }
  return d.task_energy - captured;
}

int max_rank_bound(const StackedSpectrum& gamma_bar) {
  std::vector<Eigen::VectorXd> sv(gamma_bar.blocks.size());
  for (std::size_t i = 0; i < sv.size(); ++i) {
    sv[i] = Eigen::JacobiSVD<CMatrix>(gamma_bar.blocks[i]).singularValues();
  }
  const double thresh = 1e-10 * global_sigma_max(sv);
  int best = 0;
  for (const auto& s : sv) {
    if (thresh <= 0.0) break;
    best = std::max(best, static_cast<int>((s.array() > thresh).count()));
  }
  return best;
}

int max_rank_bound(const TaskModel& model, double fs, std::size_t n_points) {
  auto a = detail::alias_sums(model, Prefilter::task, fs, n_points);
  return detail::gram_rank(detail::gram_modes(a.gram));
}

bool analog_recovery_is_optimal(const RMatrix& c) {
  if (c.rows() != c.cols()) throw std::invalid_argument("analog_recovery_is_optimal: not square");
  if ((c - c.transpose()).norm() > 1e-10 * std::max(c.norm(), 1e-300)) {
    throw std::invalid_argument("analog_recovery_is_optimal: matrix is not symmetric");
  }
  const double tr = c.trace();
  const auto n = static_cast<double>(c.rows());
  const RMatrix dev = c - (tr / n) * RMatrix::Identity(c.rows(), c.cols());
  return dev.norm() <= 1e-9 * tr;
}

FilterDesign design_task_based(const TaskModel& model, const AdcConfig& cfg,
                               const DesignOptions& opt) {
  cfg.validate();
  model.validate();
  if (cfg.k_adcs > model.m_inputs) {
    throw std::invalid_argument("design: K must not exceed M");
  }
  auto sums = detail::alias_sums(model, Prefilter::task, cfg.fs, opt.grid_points);
  const std::size_t n = sums.grid.size();
  const Eigen::Index nt = model.n_task;
  const Eigen::Index mbar = (2 * sums.upsilon + 1) * model.m_inputs;

  detail::ModeSet modes = detail::gram_modes(sums.gram);

  if (opt.fix_gauge) {
    // Right singular vectors are Gamma_bar^H u / sigma; their blocks are
    // (Gamma L)^H u evaluated at each alias, in stacked column order.
    const SpectralMatrixFunction l = psd_sqrt(model.c_x);
    std::vector<CMatrix> glh(model.c_x.values.size());
    for (std::size_t c = 0; c < glh.size(); ++c) {
      glh[c] = (model.gamma.values[c] * l.values[c]).adjoint();
    }
    const FrequencyGrid& src = model.c_x.grid;
    const Eigen::Index m = model.m_inputs;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::optional<std::size_t>> cells;
      for (int k = -sums.upsilon; k <= sums.upsilon; ++k) {
        cells.push_back(src.locate(sums.grid.points[i] - k * cfg.fs));
      }
      for (Eigen::Index j = 0; j < modes.u[i].cols(); ++j) {
        if (!(modes.sigma[i](j) > 0.0)) continue;
        std::vector<CMatrix> w(cells.size());
        for (std::size_t b = 0; b < cells.size(); ++b) {
          w[b] = cells[b] ? CMatrix(glh[*cells[b]] * modes.u[i].col(j)) : CMatrix::Zero(m, 1);
        }
        const cplx ph = gauge_phase(static_cast<Eigen::Index>(cells.size()) * m, [&](Eigen::Index p) {
          return w[static_cast<std::size_t>(p / m)](p % m, 0);
        });
        modes.u[i].col(j) *= ph;
      }
    }
  }

  auto core = detail::analog_core(sums.grid, modes, cfg, mbar, nt);
  detail::mirror_conjugate(sums, core.compression);

  std::vector<CMatrix> hh(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const CMatrix& d = core.compression[i];
    hh[i] = d * sums.gram[i] * d.adjoint();
    s[i] = sums.cross[i] * d.adjoint();
  }
  auto p = detail::prop1(sums.grid, cfg.fs, hh, s, sums.energy, cfg, opt.keep_filters);
  if (p.delta > 0.0) {
    p.mse = detail::task_prefilter_mse(sums.grid, cfg.fs, sums.gram, core.compression, p.delta);
  }

  FilterDesign design = finish_common(cfg, sums.grid, sums.upsilon, nt, std::move(modes),
                                      std::move(core));
  design.mse_theory = p.mse;
  design.task_energy = p.energy;
  design.nmse = p.energy > 0.0 ? p.mse / p.energy : 0.0;
  design.gamma_q = p.gamma;
  design.delta = p.delta;
  if (opt.keep_filters) {
    design.g_freq = on_base_grid(sums.grid, std::move(p.g));
    design.prefilter_response = model.gamma;
    SpectralMatrixFunction h;
    h.grid = model.c_x.grid;
    h.rows = cfg.k_adcs;
    h.cols = model.m_inputs;
    h.kind = SpectrumKind::filter;
    h.values.resize(h.grid.size());
    for (std::size_t c = 0; c < h.values.size(); ++c) {
      h.values[c] = design.analog_response(h.grid.points[c]);
    }
    design.h = std::move(h);
  } else {
    design.sigma_gamma.clear();
    design.sigma_h.clear();
  }
  if (opt.keep_stacked) {
    StackedSpectrum gb = stack_task(model, cfg.fs, opt.grid_points);
    StackedSpectrum hb = gb;
    for (std::size_t i = 0; i < n; ++i) hb.blocks[i] = design.compression[i] * gb.blocks[i];
    design.h_bar = std::move(hb);
  }
  return design;
}

}  // namespace taskadc

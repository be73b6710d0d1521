// SPDX-License-Identifier: Apache-2.0
#include "taskadc/spectra.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "taskadc/errors.hpp"

namespace taskadc {

namespace {

void symmetrize_edges(std::vector<double>& e) {
  // Only applied when the edge set is already symmetric up to round-off.
  const std::size_t n = e.size();
  const double scale = std::max(std::abs(e.front()), std::abs(e.back()));
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(e[i] + e[n - 1 - i]) > 1e-9 * scale) return;
  }
  for (std::size_t i = 0; i < n / 2; ++i) e[n - 1 - i] = -e[i];
  if (n % 2 == 1) e[n / 2] = 0.0;
}

void fill_from_edges(FrequencyGrid& g, const std::vector<double>& e) {
  const std::size_t n = e.size() - 1;
  g.points.resize(n);
  g.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.points[i] = 0.5 * (e[i] + e[i + 1]);
    g.weights[i] = e[i + 1] - e[i];
  }
}

}  // namespace

bool FrequencyGrid::symmetric(double tol) const {
  const double scale = std::max(std::abs(f_lo), std::abs(f_hi));
  if (std::abs(f_lo + f_hi) > tol * scale) return false;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(points[i] + points[n - 1 - i]) > tol * scale) return false;
  }
  return true;
}

std::vector<double> FrequencyGrid::edges() const { return edges_; }

std::optional<std::size_t> FrequencyGrid::locate(double f) const {
  if (!(f >= f_lo && f <= f_hi) || points.empty()) return std::nullopt;
  const std::size_t n = points.size();
  if (uniform_) {
    const double w = (f_hi - f_lo) / static_cast<double>(n);
    auto idx = static_cast<long long>(std::floor((f - f_lo) / w));
    idx = std::clamp<long long>(idx, 0, static_cast<long long>(n) - 1);
    return static_cast<std::size_t>(idx);
  }
  auto it = std::upper_bound(edges_.begin(), edges_.end(), f);
  auto idx = static_cast<long long>(it - edges_.begin()) - 1;
  idx = std::clamp<long long>(idx, 0, static_cast<long long>(n) - 1);
  return static_cast<std::size_t>(idx);
}

FrequencyGrid make_frequency_grid(double f_lo, double f_hi, std::size_t n_points) {
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) {
    throw std::invalid_argument("make_frequency_grid: band edges must be finite");
  }
  if (!(f_lo < f_hi)) throw std::invalid_argument("make_frequency_grid: need f_lo < f_hi");
  if (n_points < 2) throw std::invalid_argument("make_frequency_grid: n_points must be >= 2");

  FrequencyGrid g;
  g.f_lo = f_lo;
  g.f_hi = f_hi;
  g.base_points_ = n_points;
  const double w = (f_hi - f_lo) / static_cast<double>(n_points);
  std::vector<double> e(n_points + 1);
  for (std::size_t i = 0; i <= n_points; ++i) e[i] = f_lo + static_cast<double>(i) * w;
  e.back() = f_hi;
  symmetrize_edges(e);
  fill_from_edges(g, e);
  std::fill(g.weights.begin(), g.weights.end(), w);
  g.edges_ = std::move(e);
  return g;
}

FrequencyGrid refine_grid(const FrequencyGrid& grid, std::span<const double> breakpoints) {
  std::vector<double> e = grid.edges_;
  double min_w = grid.width();
  for (double w : grid.weights) min_w = std::min(min_w, w);
  const double tol = 1e-9 * min_w;

  std::vector<double> added;
  for (double bp : breakpoints) {
    if (!(bp > grid.f_lo + tol && bp < grid.f_hi - tol)) continue;
    auto it = std::lower_bound(e.begin(), e.end(), bp);
    const bool near_right = it != e.end() && std::abs(*it - bp) <= tol;
    const bool near_left = it != e.begin() && std::abs(*(it - 1) - bp) <= tol;
    if (near_right || near_left) continue;
    e.insert(it, bp);
    added.push_back(bp);
  }
  FrequencyGrid g = grid;
  if (added.empty()) return g;
  symmetrize_edges(e);
  fill_from_edges(g, e);
  g.edges_ = std::move(e);
  g.uniform_ = false;
  g.breakpoints_.insert(g.breakpoints_.end(), added.begin(), added.end());
  std::sort(g.breakpoints_.begin(), g.breakpoints_.end());
  return g;
}

std::string to_string(SpectrumKind kind) {
  switch (kind) {
    case SpectrumKind::psd:
      return "psd";
    case SpectrumKind::cross_psd:
      return "cross_psd";
    case SpectrumKind::filter:
      return "filter";
  }
  return "filter";
}

SpectrumKind spectrum_kind_from_string(const std::string& s) {
  if (s == "psd") return SpectrumKind::psd;
  if (s == "cross_psd") return SpectrumKind::cross_psd;
  if (s == "filter") return SpectrumKind::filter;
  throw std::invalid_argument("unknown spectrum kind '" + s + "'");
}

const CMatrix* SpectralMatrixFunction::find(double f) const {
  auto idx = grid.locate(f);
  if (!idx) return nullptr;
  return &values[*idx];
}

CMatrix SpectralMatrixFunction::at(double f) const {
  if (const CMatrix* v = find(f)) return *v;
  return CMatrix::Zero(rows, cols);
}

void SpectralMatrixFunction::validate() const {
  if (values.size() != grid.size()) {
    throw std::invalid_argument("spectrum: one value per grid point required");
  }
  for (const auto& v : values) {
    if (v.rows() != rows || v.cols() != cols) {
      throw std::invalid_argument("spectrum: matrix shape must be constant across the grid");
    }
  }
  if (kind == SpectrumKind::psd) check_psd(*this);
}

SpectralMatrixFunction constant_spectrum(const FrequencyGrid& grid, const CMatrix& value,
                                         SpectrumKind kind) {
  SpectralMatrixFunction s;
  s.grid = grid;
  s.rows = value.rows();
  s.cols = value.cols();
  s.kind = kind;
  s.values.assign(grid.size(), value);
  return s;
}

SpectralMatrixFunction multiply(const SpectralMatrixFunction& a, const SpectralMatrixFunction& b,
                                SpectrumKind kind) {
  if (a.grid.points != b.grid.points) {
    throw std::invalid_argument("multiply: spectra must share a grid");
  }
  if (a.cols != b.rows) throw std::invalid_argument("multiply: inner dimensions differ");
  SpectralMatrixFunction out;
  out.grid = a.grid;
  out.rows = a.rows;
  out.cols = b.cols;
  out.kind = kind;
  out.values.resize(a.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) out.values[i] = a.values[i] * b.values[i];
  return out;
}

CMatrix integrate_matrix(const SpectralMatrixFunction& f) {
  if (f.grid.size() == 0 || f.values.empty()) {
    throw std::invalid_argument("integrate_matrix: empty grid");
  }
  CMatrix acc = CMatrix::Zero(f.rows, f.cols);
  for (std::size_t i = 0; i < f.values.size(); ++i) acc += f.grid.weights[i] * f.values[i];
  return acc;
}

namespace {

Eigen::SelfAdjointEigenSolver<CMatrix> checked_eig(const CMatrix& c) {
  if (c.rows() != c.cols()) throw std::invalid_argument("psd: matrix must be square");
  const double scale = c.norm();
  if ((c - c.adjoint()).norm() > 1e-10 * std::max(scale, 1e-300)) {
    throw std::invalid_argument("psd: matrix is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  if (es.info() != Eigen::Success) throw NumericalError("psd: eigendecomposition failed");
  const auto& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  const double lmin = lam.minCoeff();
  if (lmin < 0.0 && lmin < -1e-10 * std::max(lmax, 0.0)) {
    throw std::invalid_argument("psd: matrix is not positive semi-definite");
  }
  return es;
}

}  // namespace

CMatrix psd_sqrt(const CMatrix& c) {
  if (c.size() == 0) return c;
  auto es = checked_eig(c);
  Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

SpectralMatrixFunction psd_sqrt(const SpectralMatrixFunction& c) {
  if (c.kind != SpectrumKind::psd) throw std::invalid_argument("psd_sqrt: spectrum kind must be psd");
  SpectralMatrixFunction out = c;
  for (auto& v : out.values) v = psd_sqrt(v);
  return out;
}

void check_psd(const SpectralMatrixFunction& c) {
  for (const auto& v : c.values) {
    if (v.size() > 0) checked_eig(v);
  }
}

double hermitian_symmetry_defect(const SpectralMatrixFunction& c) {
  const std::size_t n = c.values.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, (c.values[n - 1 - i] - c.values[i].conjugate()).norm());
  }
  return worst;
}

CMatrix pinv(const CMatrix& a, double rel_cutoff) {
  if (a.size() == 0) return CMatrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_cutoff * smax && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

int alias_order(double fs, double f_max) {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw std::invalid_argument("alias_order: fs must be > 0");
  if (!(f_max >= 0.0)) throw std::invalid_argument("alias_order: f_max must be >= 0");
  const double x = f_max / fs - 0.5;
  if (x <= 1e-12) return 0;
  return static_cast<int>(std::ceil(x - 1e-12));
}

double wrap_to_baseband(double f, double fs) { return f - fs * std::floor(f / fs + 0.5); }

FrequencyGrid baseband_grid(double fs, double f_max, std::size_t n_points) {
  FrequencyGrid g = make_frequency_grid(-0.5 * fs, 0.5 * fs, n_points);
  if (f_max <= 0.0) return g;
  const double images[2] = {wrap_to_baseband(f_max, fs), wrap_to_baseband(-f_max, fs)};
  return refine_grid(g, images);
}

CMatrix StackedSpectrum::block(std::size_t i, int k) const {
  if (k < -upsilon || k > upsilon) throw std::out_of_range("StackedSpectrum::block: alias index");
  return blocks[i].middleCols((k + upsilon) * block_cols, block_cols);
}

StackedSpectrum stack_aliases(const SpectralMatrixFunction& f, double fs, double f_max,
                              std::size_t n_points) {
  if (!(fs > 0.0)) throw std::invalid_argument("stack_aliases: fs must be > 0");
  if (f_max < 0.0) throw std::invalid_argument("stack_aliases: f_max must be >= 0");
  return stack_aliases(f, fs, f_max, baseband_grid(fs, f_max, n_points));
}

StackedSpectrum stack_aliases(const SpectralMatrixFunction& f, double fs, double f_max,
                              const FrequencyGrid& base_grid) {
  if (!(fs > 0.0)) throw std::invalid_argument("stack_aliases: fs must be > 0");
  if (f_max < 0.0) throw std::invalid_argument("stack_aliases: f_max must be >= 0");
  StackedSpectrum s;
  s.base_grid = base_grid;
  s.fs = fs;
  s.upsilon = alias_order(fs, f_max);
  s.block_cols = f.cols;
  const Eigen::Index m = f.cols;
  s.blocks.assign(base_grid.size(), CMatrix::Zero(f.rows, (2 * s.upsilon + 1) * m));
  for (std::size_t i = 0; i < base_grid.size(); ++i) {
    for (int k = -s.upsilon; k <= s.upsilon; ++k) {
      if (const CMatrix* v = f.find(base_grid.points[i] - k * fs)) {
        s.blocks[i].middleCols((k + s.upsilon) * m, m) = *v;
      }
    }
  }
  return s;
}

CMatrix integrate_gram(const StackedSpectrum& s) {
  if (s.blocks.empty()) throw std::invalid_argument("integrate_gram: empty grid");
  CMatrix acc = CMatrix::Zero(s.rows(), s.rows());
  for (std::size_t i = 0; i < s.blocks.size(); ++i) {
    acc += s.base_grid.weights[i] * (s.blocks[i] * s.blocks[i].adjoint());
  }
  return acc;
}

}  // namespace taskadc

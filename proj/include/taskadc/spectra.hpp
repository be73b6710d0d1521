// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace taskadc {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

inline constexpr std::size_t kDefaultGridPoints = 4096;

// Midpoint quadrature grid. Cell i spans [edge(i), edge(i+1)] and is represented
// by points[i] with weight = cell width.
struct FrequencyGrid {
  double f_lo = 0.0;
  double f_hi = 0.0;
  std::vector<double> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
  double width() const { return f_hi - f_lo; }
  bool symmetric(double tol = 1e-12) const;
  // Left edges of all cells followed by f_hi.
  std::vector<double> edges() const;
  // Cell containing f, or nullopt outside [f_lo, f_hi].
  std::optional<std::size_t> locate(double f) const;
  // True when no cell was split by refine_grid.
  bool uniform() const { return uniform_; }
  std::size_t base_points() const { return base_points_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }

 private:
  friend FrequencyGrid make_frequency_grid(double, double, std::size_t);
  friend FrequencyGrid refine_grid(const FrequencyGrid&, std::span<const double>);
  bool uniform_ = true;
  std::size_t base_points_ = 0;
  std::vector<double> breakpoints_;
  std::vector<double> edges_;
};

FrequencyGrid make_frequency_grid(double f_lo, double f_hi, std::size_t n_points);

// Splits every cell that strictly contains one of the breakpoints, so that
// piecewise-constant integrands with jumps at those frequencies are integrated
// exactly by the midpoint rule.
FrequencyGrid refine_grid(const FrequencyGrid& grid, std::span<const double> breakpoints);

enum class SpectrumKind { psd, cross_psd, filter };

std::string to_string(SpectrumKind kind);
SpectrumKind spectrum_kind_from_string(const std::string& s);

struct SpectralMatrixFunction {
  FrequencyGrid grid;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  SpectrumKind kind = SpectrumKind::filter;
  std::vector<CMatrix> values;

  // Piecewise-constant evaluation: value of the cell containing f, zero
  // outside the grid band.
  CMatrix at(double f) const;
  const CMatrix* find(double f) const;
  void validate() const;
};

SpectralMatrixFunction constant_spectrum(const FrequencyGrid& grid, const CMatrix& value,
                                         SpectrumKind kind);
SpectralMatrixFunction multiply(const SpectralMatrixFunction& a, const SpectralMatrixFunction& b,
                                SpectrumKind kind);

CMatrix integrate_matrix(const SpectralMatrixFunction& f);

// Hermitian PSD square root of one matrix; throws if an eigenvalue is below
// -1e-10 * lambda_max.
CMatrix psd_sqrt(const CMatrix& c);
SpectralMatrixFunction psd_sqrt(const SpectralMatrixFunction& c);

// Throws if any value is not Hermitian PSD within tolerance.
void check_psd(const SpectralMatrixFunction& c);

// max over f of || C(-f) - conj(C(f)) ||, only meaningful on symmetric grids.
double hermitian_symmetry_defect(const SpectralMatrixFunction& c);

CMatrix pinv(const CMatrix& a, double rel_cutoff = 1e-12);

// Smallest integer U >= 0 with (U + 1/2) fs >= f_max.
int alias_order(double fs, double f_max);

// Uniform midpoint grid on [-fs/2, fs/2], refined at the images of +-f_max
// folded into the base band.
FrequencyGrid baseband_grid(double fs, double f_max, std::size_t n_points = kDefaultGridPoints);

struct StackedSpectrum {
  FrequencyGrid base_grid;
  double fs = 0.0;
  int upsilon = 0;
  Eigen::Index block_cols = 0;  // M
  std::vector<CMatrix> blocks;  // rows x (2U+1) M per base point

  Eigen::Index rows() const { return blocks.empty() ? 0 : blocks.front().rows(); }
  Eigen::Index cols() const { return (2 * upsilon + 1) * block_cols; }
  // Alias block k in [-U, U] at base point i.
  CMatrix block(std::size_t i, int k) const;
};

StackedSpectrum stack_aliases(const SpectralMatrixFunction& f, double fs, double f_max,
                              std::size_t n_points = kDefaultGridPoints);
StackedSpectrum stack_aliases(const SpectralMatrixFunction& f, double fs, double f_max,
                              const FrequencyGrid& base_grid);

// Pointwise integral of X X^H over the base grid.
CMatrix integrate_gram(const StackedSpectrum& s);

// Map a frequency into [-fs/2, fs/2).
double wrap_to_baseband(double f, double fs);

}  // namespace taskadc

// SPDX-License-Identifier: Apache-2.0
#include "taskadc/mmse.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace taskadc {

double TaskModel::f_max() const {
  return std::max(std::abs(c_x.grid.f_lo), std::abs(c_x.grid.f_hi));
}

void TaskModel::validate() const {
  if (n_task < 1 || m_inputs < 1) throw std::invalid_argument("task model: need N >= 1 and M >= 1");
  if (gamma.rows != n_task || gamma.cols != m_inputs) {
    throw std::invalid_argument("task model: Gamma must be N x M");
  }
  if (c_x.rows != m_inputs || c_x.cols != m_inputs) {
    throw std::invalid_argument("task model: C_x must be M x M");
  }
  if (c_sx.rows != n_task || c_sx.cols != m_inputs) {
    throw std::invalid_argument("task model: C_sx must be N x M");
  }
  if (gamma.grid.points != c_x.grid.points || c_sx.grid.points != c_x.grid.points) {
    throw std::invalid_argument("task model: spectra must share a grid");
  }
}

SpectralMatrixFunction analog_mmse_filter(const SpectralMatrixFunction& c_sx,
                                          const SpectralMatrixFunction& c_x) {
  if (c_x.rows != c_x.cols) throw std::invalid_argument("analog_mmse_filter: C_x must be square");
  if (c_sx.cols != c_x.rows) {
    throw std::invalid_argument("analog_mmse_filter: C_sx columns must match C_x size");
  }
  if (c_sx.grid.points != c_x.grid.points) {
    throw std::invalid_argument("analog_mmse_filter: spectra must share a grid");
  }
  check_psd(c_x);
  SpectralMatrixFunction g;
  g.grid = c_x.grid;
  g.rows = c_sx.rows;
  g.cols = c_x.cols;
  g.kind = SpectrumKind::filter;
  g.values.resize(c_x.values.size());
  for (std::size_t i = 0; i < c_x.values.size(); ++i) {
    g.values[i] = c_sx.values[i] * pinv(c_x.values[i], 1e-12);
  }
  return g;
}

TaskModel make_task_model(const SpectralMatrixFunction& c_sx, const SpectralMatrixFunction& c_x) {
  TaskModel m;
  m.gamma = analog_mmse_filter(c_sx, c_x);
  m.c_x = c_x;
  m.c_sx = c_sx;
  m.n_task = c_sx.rows;
  m.m_inputs = c_x.rows;
  m.validate();
  return m;
}

StackedSpectrum stack_task(const TaskModel& model, double fs, std::size_t n_points, double t0) {
  SpectralMatrixFunction gl = multiply(model.gamma, psd_sqrt(model.c_x), SpectrumKind::filter);
  StackedSpectrum s = stack_aliases(gl, fs, model.f_max(), n_points);
  if (t0 != 0.0) {
    const Eigen::Index m = s.block_cols;
    for (std::size_t i = 0; i < s.blocks.size(); ++i) {
      for (int k = -s.upsilon; k <= s.upsilon; ++k) {
        const double f = s.base_grid.points[i] - k * fs;
        const cplx ph = std::polar(1.0, -2.0 * std::numbers::pi * f * t0);
        s.blocks[i].middleCols((k + s.upsilon) * m, m) *= ph;
      }
    }
  }
  return s;
}

double task_energy(const StackedSpectrum& gamma_bar) {
  double e = 0.0;
  for (std::size_t i = 0; i < gamma_bar.blocks.size(); ++i) {
    e += gamma_bar.base_grid.weights[i] * gamma_bar.blocks[i].squaredNorm();
  }
  return e;
}

RMatrix task_covariance(const TaskModel& model) {
  CMatrix acc = CMatrix::Zero(model.n_task, model.n_task);
  const auto& g = model.gamma;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    acc += g.grid.weights[i] * (g.values[i] * model.c_x.values[i] * g.values[i].adjoint());
  }
  // Real signals: the imaginary parts cancel between +f and -f.
  RMatrix c = acc.real();
  return 0.5 * (c + c.transpose());
}

}  // namespace taskadc

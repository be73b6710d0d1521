// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "taskadc/spectra.hpp"

namespace taskadc {

// Linear task s = (Gamma * x)(0) on M jointly stationary inputs. All three
// spectra share the signal-band grid.
struct TaskModel {
  SpectralMatrixFunction gamma;  // N x M
  SpectralMatrixFunction c_x;    // M x M
  SpectralMatrixFunction c_sx;   // N x M
  Eigen::Index n_task = 0;
  Eigen::Index m_inputs = 0;

  // Largest |f| with possibly non-zero input spectrum.
  double f_max() const;
  void validate() const;
};

// Gamma(f) = C_sx(f) pinv(C_x(f)), singular values below 1e-12 sigma_max dropped.
SpectralMatrixFunction analog_mmse_filter(const SpectralMatrixFunction& c_sx,
                                          const SpectralMatrixFunction& c_x);

TaskModel make_task_model(const SpectralMatrixFunction& c_sx, const SpectralMatrixFunction& c_x);

// Stacked [Gamma_k L_k]_k with L = C_x^{1/2}; t0 shifts the task instant via
// Gamma(f) exp(-j 2 pi f t0).
StackedSpectrum stack_task(const TaskModel& model, double fs,
                           std::size_t n_points = kDefaultGridPoints, double t0 = 0.0);

// trace of the integral of Gamma_bar Gamma_bar^H over the base grid.
double task_energy(const StackedSpectrum& gamma_bar);

// Integral of Gamma C_x Gamma^H over the signal band.
RMatrix task_covariance(const TaskModel& model);

}  // namespace taskadc

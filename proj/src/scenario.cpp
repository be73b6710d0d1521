// SPDX-License-Identifier: Apache-2.0
#include "taskadc/scenario.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "taskadc/random.hpp"

namespace taskadc {

RMatrix spatial_correlation(int m, double sigma_phi) {
  if (m < 1) throw std::invalid_argument("spatial_correlation: need at least one antenna");
  if (!(sigma_phi > 0.0)) throw std::invalid_argument("spatial_correlation: spread must be > 0");
  const double pi = std::numbers::pi;
  const double norm = 1.0 / (1.0 - std::exp(-std::sqrt(2.0) * pi / sigma_phi));
  RMatrix c(m, m);
  for (int r = 0; r < m; ++r) {
    for (int s = 0; s < m; ++s) {
      const double d = pi * static_cast<double>(r - s);
      c(r, s) = norm / (1.0 + 0.5 * sigma_phi * sigma_phi * d * d);
    }
  }
  return c;
}

RMatrix random_channel(int m, int n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw std::invalid_argument("random_channel: dimensions must be >= 1");
  CounterRng rng(seed, 0x636861);
  RMatrix h(m, n);
  // column-major fill, matching the usual randn(M, N) layout
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < m; ++r) h(r, c) = rng.normal();
  }
  return h;
}

RMatrix effective_channel(const ScenarioSpec& spec) {
  if (spec.n_streams < 1 || spec.m_antennas < 1) {
    throw std::invalid_argument("scenario: N and M must be >= 1");
  }
  const RMatrix h = spec.channel ? *spec.channel
                                 : random_channel(spec.m_antennas, spec.n_streams, spec.channel_seed);
  if (h.rows() != spec.m_antennas || h.cols() != spec.n_streams) {
    throw std::invalid_argument("scenario: channel matrix must be M x N");
  }
  const CMatrix r = psd_sqrt(CMatrix(spatial_correlation(spec.m_antennas, spec.sigma_phi).cast<cplx>()));
  return r.real() * h;
}

double noise_level(const RMatrix& f_tilde, double snr_db) {
  if (!std::isfinite(snr_db)) throw std::invalid_argument("scenario: SNR must be finite");
  const double p = (f_tilde * f_tilde.transpose()).trace();
  if (!(p > 0.0)) throw std::invalid_argument("scenario: channel carries no power");
  return 2.0 * p / std::pow(10.0, snr_db / 10.0);
}

double snr_db_from_noise(const RMatrix& f_tilde, double n0) {
  return 10.0 * std::log10(2.0 * (f_tilde * f_tilde.transpose()).trace() / n0);
}

TaskModel build_scenario(const ScenarioSpec& spec) {
  if (!(spec.f_nyq > 0.0)) throw std::invalid_argument("scenario: f_nyq must be > 0");
  const RMatrix f = effective_channel(spec);
  const double n0 = noise_level(f, spec.snr_db);
  const auto m = static_cast<Eigen::Index>(spec.m_antennas);

  // Brickwall sinc pulses give flat in-band levels with unit gain.
  const RMatrix cx = f * f.transpose() + 0.5 * n0 * RMatrix::Identity(m, m);
  const RMatrix csx = (f.transpose() * f) * f.transpose();
  const FrequencyGrid grid = make_frequency_grid(-0.5 * spec.f_nyq, 0.5 * spec.f_nyq, spec.grid_points);
  return make_task_model(constant_spectrum(grid, csx.cast<cplx>(), SpectrumKind::cross_psd),
                         constant_spectrum(grid, cx.cast<cplx>(), SpectrumKind::psd));
}

TaskModel diagonal_task_scenario(const Eigen::VectorXd& gains, double f_nyq, std::size_t grid_points) {
  if (gains.size() < 1) throw std::invalid_argument("isotropic_scenario: n must be >= 1");
  if (!(f_nyq > 0.0)) throw std::invalid_argument("isotropic_scenario: band must be > 0");
  const FrequencyGrid grid = make_frequency_grid(-0.5 * f_nyq, 0.5 * f_nyq, grid_points);
  const Eigen::Index n = gains.size();
  const CMatrix cx = CMatrix::Identity(n, n);
  const CMatrix csx = gains.cast<cplx>().asDiagonal();
  return make_task_model(constant_spectrum(grid, csx, SpectrumKind::cross_psd),
                         constant_spectrum(grid, cx, SpectrumKind::psd));
}

TaskModel isotropic_scenario(int n, double f_nyq, double gain, std::size_t grid_points) {
  if (n < 1) throw std::invalid_argument("isotropic_scenario: n must be >= 1");
  return diagonal_task_scenario(Eigen::VectorXd::Constant(n, gain), f_nyq, grid_points);
}

TaskModel scalar_scenario(double f_nyq, double snr_db, std::size_t grid_points) {
  ScenarioSpec s;
  s.n_streams = 1;
  s.m_antennas = 1;
  s.f_nyq = f_nyq;
  s.snr_db = snr_db;
  s.channel = RMatrix::Ones(1, 1);
  s.grid_points = grid_points;
  return build_scenario(s);
}

}  // namespace taskadc

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "taskadc/mmse.hpp"

namespace taskadc {

// Seed for the random channel when no matrix is supplied.
inline constexpr std::uint64_t kDefaultChannelSeed = 0;

// MIMO matched-filter receiver: N streams through an M x N flat channel with
// correlated receive antennas and white noise, all bandlimited to f_nyq / 2.
struct ScenarioSpec {
  int n_streams = 4;
  int m_antennas = 16;
  double f_nyq = 400e6;
  double snr_db = 10.0;
  double sigma_phi = 0.017453292519943295;  // radians (1 degree)
  std::optional<RMatrix> channel;           // M x N; drawn from channel_seed when absent
  std::uint64_t channel_seed = kDefaultChannelSeed;
  std::size_t grid_points = kDefaultGridPoints;
};

RMatrix spatial_correlation(int m, double sigma_phi);

// i.i.d. standard normal M x N matrix from the counter-based generator.
RMatrix random_channel(int m, int n, std::uint64_t seed);

// C_Rx^{1/2} H_ch
RMatrix effective_channel(const ScenarioSpec& spec);

// N0 such that (2 / N0) tr(F F^T) = 10^(snr_db / 10).
double noise_level(const RMatrix& f_tilde, double snr_db);
double snr_db_from_noise(const RMatrix& f_tilde, double n0);

TaskModel build_scenario(const ScenarioSpec& spec);

// N = M = n, C_x = I and Gamma = diag(gains) on |f| <= f_nyq / 2. With equal
// gains the task covariance is a multiple of the identity.
TaskModel isotropic_scenario(int n, double f_nyq, double gain = 0.5,
                             std::size_t grid_points = kDefaultGridPoints);
TaskModel diagonal_task_scenario(const Eigen::VectorXd& gains, double f_nyq,
                                 std::size_t grid_points = kDefaultGridPoints);

// Single-antenna, single-stream version of the matched-filter scenario.
TaskModel scalar_scenario(double f_nyq, double snr_db = 10.0,
                          std::size_t grid_points = kDefaultGridPoints);

}  // namespace taskadc

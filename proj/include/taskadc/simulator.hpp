// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "taskadc/filter_design.hpp"
#include "taskadc/random.hpp"

namespace taskadc {

inline constexpr std::size_t kDefaultTrials = 10000;
inline constexpr std::size_t kDefaultBlockSamples = std::size_t{1} << 14;
inline constexpr double kDefaultOversample = 4.0;
inline constexpr double kDefaultGuardFraction = 0.1;

// K x M response at a physical frequency.
using AnalogFilter = std::function<CMatrix(double)>;

// One periodic block of a real bandlimited process on the simulation grid.
// Bin k sits at f = k / T; only k >= 0 is stored, negative bins are the
// conjugates. Sample n of the time series is at t = (n - L/2) / grid_rate.
struct ProcessBlock {
  double grid_rate = 0.0;
  std::size_t length = 0;           // L
  std::vector<long> bins;           // 0, 1, ..., k_max
  CMatrix increments;               // M x bins.size()

  double duration() const { return static_cast<double>(length) / grid_rate; }
  double bin_frequency(long k) const { return static_cast<double>(k) / duration(); }
  Eigen::Index channels() const { return increments.rows(); }
  RMatrix to_time_domain() const;   // M x L
};

// Draws blocks for a fixed PSD; the factorization of C_x is done once.
class ProcessSynthesizer {
 public:
  ProcessSynthesizer(const SpectralMatrixFunction& c_x, double duration, double oversample_factor);
  ProcessBlock draw(CounterRng& rng) const;

  double grid_rate() const { return grid_rate_; }
  std::size_t length() const { return length_; }
  double band_edge() const { return f_max_; }

 private:
  double grid_rate_ = 0.0;
  std::size_t length_ = 0;
  double f_max_ = 0.0;
  std::vector<CMatrix> scale_;  // sqrt(C_x w / T) per stored bin
};

ProcessBlock synthesize_process(const SpectralMatrixFunction& c_x, double duration,
                                double oversample_factor, CounterRng& rng);

// Nearest rate of the form grid_rate / D with integer D >= 1.
double snap_sampling_rate(double fs, double grid_rate);

struct AcquisitionResult {
  double fs = 0.0;
  std::size_t decimation = 0;
  RMatrix clean;                 // Ts y[n], K x L'
  RMatrix z;                     // quantizer output, K x L'
  std::size_t interior_begin = 0;
  std::size_t interior_end = 0;  // exclusive
  std::size_t overloads = 0;     // over interior samples and channels
  double overload_rate = 0.0;
  bool degenerate = false;       // gamma = 0

  std::size_t length() const { return static_cast<std::size_t>(z.cols()); }
  std::size_t center() const { return length() / 2; }
};

// Filters the block by h, samples at cfg.fs with the Ts gain, adds dither
// when spec.dithered and quantizes. The dither stream for channel c is
// rng.split(c).
AcquisitionResult run_acquisition(const ProcessBlock& block, const AnalogFilter& h,
                                  const AdcConfig& cfg, const QuantizerSpec& spec,
                                  const CounterRng& rng,
                                  double guard_fraction = kDefaultGuardFraction);

// Digital recovery over the whole block, N x L'.
RMatrix recover_task_series(const AcquisitionResult& acq, const SpectralMatrixFunction& g_freq);

// Estimate at the sample t0 away from the block center. t0 must be a whole
// number of sampling periods inside the interior; fractional instants are
// handled by designing for the shifted task instead.
Eigen::VectorXd recover_task(const AcquisitionResult& acq, const SpectralMatrixFunction& g_freq,
                             double t0);

struct SimulationRun {
  std::string scenario_id;
  TaskModel model;
  FilterDesign design;  // needs prefilter_response and g_freq
  std::size_t n_trials = kDefaultTrials;
  double block_duration = 0.0;  // 0: kDefaultBlockSamples on the simulation grid
  double oversample_factor = kDefaultOversample;
  std::uint64_t seed = 0;
  bool dithered = true;
  double guard_fraction = kDefaultGuardFraction;
  bool record_trials = false;

  double grid_rate() const;
  double duration() const;
  void validate() const;
};

struct TrialRecord {
  std::size_t trial = 0;
  double sq_error = 0.0;
  std::size_t overloads = 0;
};

struct SimulationReport {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::size_t n_trials = 0;
  bool dithered = true;
  double fs = 0.0;
  double empirical_mse = 0.0;
  double empirical_nmse = 0.0;
  double std_error = 0.0;       // of empirical_mse
  double nmse_std_error = 0.0;
  double overload_rate = 0.0;
  double orthogonality_residual = 0.0;   // || mean (s - s_hat) z^T ||_F
  double orthogonality_std_error = 0.0;  // pooled over entries
  double theory_nmse = 0.0;
  std::vector<TrialRecord> trials;
};

// Each trial scores every interior sample as an instance of the task instant
// (the block is stationary), so one trial contributes the interior mean.
SimulationReport estimate_mse(const SimulationRun& run);

}  // namespace taskadc

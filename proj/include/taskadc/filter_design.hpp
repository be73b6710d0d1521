// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "taskadc/mmse.hpp"
#include "taskadc/quantizer.hpp"
#include "taskadc/spectra.hpp"

namespace taskadc {

struct AdcConfig {
  int k_adcs = 1;
  double fs = 0.0;  // Hz
  int bits = 1;
  double eta = 2.0;

  double rate() const { return static_cast<double>(k_adcs) * fs * static_cast<double>(bits); }
  double ts() const { return 1.0 / fs; }
  void validate() const;
};

// eta defaults to the eta(b) schedule.
AdcConfig make_config(int k_adcs, double fs, int bits, std::optional<double> eta = std::nullopt);

// What the analog filter applies before the per-frequency compression matrix:
// H(f) = D(f mod fs) P(f) with P = Gamma (task) or P = I (identity).
enum class Prefilter { task, identity };

struct MseResult {
  double mse = 0.0;
  double nmse = 0.0;
  double task_energy = 0.0;
  double gamma = 0.0;  // quantizer dynamic range implied by H
  double delta = 0.0;  // quantizer step
};

struct FilterDesign {
  AdcConfig cfg;
  FrequencyGrid base_grid;
  int upsilon = 0;
  Eigen::Index n_task = 0;

  std::optional<StackedSpectrum> h_bar;       // K x Mbar
  std::optional<SpectralMatrixFunction> h;    // K x M on the signal band
  SpectralMatrixFunction g_freq;              // N x K on the base grid

  double zeta = 0.0;
  std::vector<Eigen::VectorXd> sigma_gamma;   // singular values of Gamma_bar per base point
  std::vector<Eigen::VectorXd> sigma_h;       // designed singular values per base point (K each)
  std::vector<CMatrix> compression;           // D(f0), K x P
  Prefilter prefilter = Prefilter::task;
  std::optional<SpectralMatrixFunction> prefilter_response;  // P x M on the signal band

  double gamma_q = 0.0;
  double delta = 0.0;
  double mse_theory = 0.0;
  double nmse = 0.0;
  double task_energy = 0.0;
  double t0 = 0.0;

  // Analog filter at physical frequency f; needs prefilter_response.
  CMatrix analog_response(double f) const;
  // Number of non-zero designed singular values at base point i.
  std::size_t active_modes(std::size_t i) const;
  QuantizerSpec quantizer(bool dithered) const;
};

// Solves the quantizer-support constraint for the water-filling level. singvals[i]
// holds the descending singular values at base point i; only the first
// min(K, mbar_cols) of each enter, and values below 1e-12 sigma_max are dropped.
double solve_waterfill_level(const std::vector<Eigen::VectorXd>& singvals, const FrequencyGrid& grid,
                             const AdcConfig& cfg, Eigen::Index mbar_cols);

// Unitary U with diag(U a U^H) = trace(a)/K, built from at most K-1 Givens rotations.
CMatrix equalize_diagonal(const CMatrix& a);

// Analog part from the stacked task spectrum (SVD per base point).
FilterDesign design_analog_filter(const StackedSpectrum& gamma_bar, const AdcConfig& cfg);

// Analog part plus digital filter and general-form MSE.
FilterDesign design_filters(const StackedSpectrum& gamma_bar, const AdcConfig& cfg);

// Unstacked filter H = H_bar pinv(C_x^{1/2}); only without aliasing.
SpectralMatrixFunction nyquist_analog_filter(const FilterDesign& design,
                                             const SpectralMatrixFunction& c_x);

SpectralMatrixFunction design_digital_filter(const StackedSpectrum& h_bar,
                                             const StackedSpectrum& gamma_bar, const AdcConfig& cfg);

MseResult theoretical_mse(const StackedSpectrum& h_bar, const StackedSpectrum& gamma_bar,
                          const AdcConfig& cfg);

// MSE from designed and task singular values (valid for the optimal analog filter).
double diagonal_form_mse(const FilterDesign& design);

int max_rank_bound(const StackedSpectrum& gamma_bar);

bool analog_recovery_is_optimal(const RMatrix& c_stilde);

struct DesignOptions {
  std::size_t grid_points = kDefaultGridPoints;
  bool keep_stacked = false;  // materialize h_bar (memory grows with the alias order)
  bool fix_gauge = true;      // deterministic singular-vector phases
  bool keep_filters = true;   // g_freq, h and per-point singular values
};

// Task-based design straight from the model, using alias sums of small
// per-cell products instead of the stacked matrices.
FilterDesign design_task_based(const TaskModel& model, const AdcConfig& cfg,
                               const DesignOptions& opt = {});

int max_rank_bound(const TaskModel& model, double fs, std::size_t n_points = kDefaultGridPoints);

namespace detail {

// Per base point sums over the in-band aliases f0 - k fs:
//   gram        = sum P C_x P^H
//   cross       = sum exp(-j2pi (f0 - k fs) t0) Gamma C_x P^H
//   cross_stack = blocks Gamma C_x P^H stacked vertically, so that
//                 cross_stack^H cross_stack = sum (Gamma C_x P^H)^H (Gamma C_x P^H)
//   energy      = sum tr(Gamma C_x Gamma^H)
struct AliasSums {
  FrequencyGrid grid;
  double fs = 0.0;
  int upsilon = 0;
  std::vector<CMatrix> gram;
  std::vector<CMatrix> cross;
  std::vector<CMatrix> cross_stack;
  std::vector<double> energy;
};

AliasSums alias_sums(const TaskModel& model, Prefilter prefilter, double fs, std::size_t n_points,
                     double t0 = 0.0, bool with_cross_stack = false);

struct ModeSet {
  std::vector<Eigen::VectorXd> sigma;  // descending
  std::vector<CMatrix> u;              // left singular vectors, N x r
};

// Modes of Gamma_bar from its per-point Gram matrix, in descending order.
ModeSet gram_modes(const std::vector<CMatrix>& gram);

// Largest per-point count of modes above the Gram round-off threshold.
int gram_rank(const ModeSet& modes);

struct AnalogCore {
  double zeta = 0.0;
  std::vector<Eigen::VectorXd> sigma_h;
  std::vector<CMatrix> u_h;
  std::vector<CMatrix> compression;  // K x N
};

AnalogCore analog_core(const FrequencyGrid& grid, const ModeSet& modes, const AdcConfig& cfg,
                       Eigen::Index mbar_cols, Eigen::Index n_task);

// When the alias sums at -f0 are the conjugates of those at f0 (real
// processes), overwrites the compression at negative base points with the
// conjugate of its mirror so the analog filter has a real impulse response.
// The MSE is unchanged. Returns false and leaves d untouched otherwise.
bool mirror_conjugate(const AliasSums& sums, std::vector<CMatrix>& d);

struct Prop1 {
  double mse = 0.0;
  double energy = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  std::vector<CMatrix> g;  // N x K per point (when requested)
};

// Digital filter and MSE for given per-point H_bar H_bar^H (K x K) and
// S = Gamma_bar H_bar^H (N x K).
Prop1 prop1(const FrequencyGrid& grid, double fs, const std::vector<CMatrix>& hh,
            const std::vector<CMatrix>& s, const std::vector<double>& energy, const AdcConfig& cfg,
            bool keep_g);

// MSE for the task prefilter at t0 = 0, where the cross sum equals the Gram
// sum G: per point tr(A (I + (Ts / q) A D^H D A)^{-1} A) with A = G^{1/2} and
// q = delta^2 / 4. Same value as prop1 without subtracting two nearly equal
// numbers at fine resolution. delta must be > 0.
double task_prefilter_mse(const FrequencyGrid& grid, double fs, const std::vector<CMatrix>& gram,
                          const std::vector<CMatrix>& d, double delta);

// Quantizer step implied by H_bar H_bar^H through the loading rule.
double implied_delta(const FrequencyGrid& grid, double fs, const std::vector<CMatrix>& hh,
                     const AdcConfig& cfg, double* gamma_out = nullptr);

}  // namespace detail

}  // namespace taskadc

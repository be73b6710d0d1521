// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "taskadc/scenario.hpp"
#include "taskadc/simulator.hpp"

using namespace taskadc;

namespace {

struct Moments {
  double sum = 0.0, sum_sq = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double se() const { return std::sqrt((sum_sq / n - mean() * mean()) / (n - 1)); }
};

SpectralMatrixFunction flat_psd(double band, const CMatrix& c, std::size_t n = 64) {
  return constant_spectrum(make_frequency_grid(-0.5 * band, 0.5 * band, n), c, SpectrumKind::psd);
}

FilterDesign scalar_design(const TaskModel& m, int bits, double eta) {
  DesignOptions opt;
  opt.grid_points = 256;
  return design_task_based(m, make_config(1, 2.0 * m.f_max(), bits, eta), opt);
}

}  // namespace

TEST_CASE("synthesized flat process has the band power as variance") {
  const double band = 2.0;
  ProcessSynthesizer synth(flat_psd(band, CMatrix::Constant(1, 1, 1.0)), 64.0, 4.0);
  CHECK(synth.grid_rate() == 8.0);
  CHECK(synth.length() == 512);
  const CounterRng root(1);
  Moments m;
  for (int t = 0; t < 300; ++t) {
    CounterRng r = root.split(t);
    const RMatrix x = synth.draw(r).to_time_domain();
    m.add(x.squaredNorm() / static_cast<double>(x.cols()));
  }
  CHECK(std::abs(m.mean() - band) < 3.0 * m.se());
}

TEST_CASE("zero spectrum gives a zero block") {
  CounterRng r(2);
  const ProcessBlock b = synthesize_process(flat_psd(1.0, CMatrix::Zero(2, 2)), 128.0, 4.0, r);
  CHECK(b.to_time_domain().norm() == 0.0);
}

TEST_CASE("correlated channels reproduce the correlation coefficient") {
  const double rho = 0.6;
  CMatrix c(2, 2);
  c << 1.0, rho, rho, 1.0;
  ProcessSynthesizer synth(flat_psd(1.0, c), 128.0, 4.0);
  const CounterRng root(3);
  Moments m;
  for (int t = 0; t < 300; ++t) {
    CounterRng r = root.split(t);
    const RMatrix x = synth.draw(r).to_time_domain();
    m.add(x.row(0).dot(x.row(1)) / std::sqrt(x.row(0).squaredNorm() * x.row(1).squaredNorm()));
  }
  CHECK(std::abs(m.mean() - rho) < 3.0 * m.se());
}

TEST_CASE("synthesis preconditions") {
  const auto c = flat_psd(1.0, CMatrix::Constant(1, 1, 1.0));
  CHECK_THROWS_AS(ProcessSynthesizer(c, 8.0, 4.0), std::invalid_argument);  // 17 bins
  CHECK_THROWS_AS(ProcessSynthesizer(c, 128.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(ProcessSynthesizer(c, -1.0, 4.0), std::invalid_argument);
}

TEST_CASE("sampling-rate snapping") {
  CHECK(snap_sampling_rate(1.0, 8.0) == 1.0);
  CHECK(snap_sampling_rate(0.95, 8.0) == 1.0);
  CHECK(snap_sampling_rate(0.9, 8.0) == doctest::Approx(8.0 / 9.0));
  CHECK(snap_sampling_rate(3.0, 8.0) == doctest::Approx(8.0 / 3.0));
  CHECK(snap_sampling_rate(20.0, 8.0) == 8.0);
  CHECK_THROWS_AS(snap_sampling_rate(0.0, 8.0), std::invalid_argument);
}

TEST_CASE("transparent chain samples the input with the Ts gain") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 64);
  ProcessSynthesizer synth(m.c_x, 64.0, 4.0);
  CounterRng r(4);
  const ProcessBlock block = synth.draw(r);
  const RMatrix x = block.to_time_domain();
  const AdcConfig cfg = make_config(1, 2.0, 30, 2.0);
  const double scale = 1e3 * std::sqrt(x.squaredNorm() / x.cols());
  const auto q = QuantizerSpec::make(30, scale, false);
  const AcquisitionResult a = run_acquisition(
      block, [](double) { return CMatrix::Identity(1, 1); }, cfg, q, CounterRng(5));
  REQUIRE(a.decimation == 4);
  CHECK(a.overloads == 0);
  // t = 0 sits at the block center for both rates.
  for (Eigen::Index n = 0; n < a.clean.cols(); ++n) {
    const double expect = cfg.ts() * x(0, n * 4);
    CHECK(std::abs(a.clean(0, n) - expect) < 1e-9 * scale);
    CHECK(std::abs(a.z(0, n) - a.clean(0, n)) <= 0.5 * q.delta * (1.0 + 1e-9));
  }
  CHECK(a.center() * 4 == block.length / 2);

  AdcConfig bad = cfg;
  bad.fs = 3.0;
  CHECK_THROWS_AS(run_acquisition(block, [](double) { return CMatrix::Identity(1, 1); }, bad, q,
                                  CounterRng(5)),
                  std::invalid_argument);
}

TEST_CASE("zero dynamic range is flagged as degenerate") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 64);
  CounterRng r(6);
  const ProcessBlock block = synthesize_process(m.c_x, 64.0, 4.0, r);
  const auto q = QuantizerSpec::make(4, 0.0, true);
  const AcquisitionResult a = run_acquisition(
      block, [](double) { return CMatrix::Identity(1, 1); }, make_config(1, 2.0, 4), q,
      CounterRng(7));
  CHECK(a.degenerate);
  CHECK(a.z.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.overload_rate == 1.0);
}

TEST_CASE("overload rate at a generous loading factor") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 256);
  const FilterDesign d = scalar_design(m, 4, 4.0);
  ProcessSynthesizer synth(m.c_x, 1024.0, 4.0);
  const CounterRng root(8);
  std::size_t over = 0;
  double samples = 0.0;
  for (int t = 0; t < 50; ++t) {
    CounterRng br = root.split(t).split(0);
    const AcquisitionResult a =
        run_acquisition(synth.draw(br), [&](double f) { return d.analog_response(f); }, d.cfg,
                        d.quantizer(true), root.split(t).split(1));
    over += a.overloads;
    samples += static_cast<double>(a.interior_end - a.interior_begin);
  }
  CHECK(static_cast<double>(over) / samples < 1e-3);
}

TEST_CASE("digital recovery") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 256);
  const FilterDesign d = scalar_design(m, 24, 2.0);
  ProcessSynthesizer synth(m.c_x, 512.0, 4.0);
  CounterRng r(9);
  const ProcessBlock block = synth.draw(r);
  const RMatrix x = block.to_time_domain();
  const AcquisitionResult a = run_acquisition(
      block, [&](double f) { return d.analog_response(f); }, d.cfg, d.quantizer(true), CounterRng(10));

  SpectralMatrixFunction zero = d.g_freq;
  for (auto& v : zero.values) v.setZero();
  CHECK(recover_task(a, zero, 0.0).norm() == 0.0);

  // Fine quantization: the estimate matches Gamma x(0).
  const double gamma = m.gamma.values.front()(0, 0).real();
  const double truth0 = gamma * x(0, block.length / 2);
  const double truth1 = gamma * x(0, block.length / 2 + a.decimation);
  const double rms = gamma * std::sqrt(x.squaredNorm() / x.cols());
  CHECK(std::abs(recover_task(a, d.g_freq, 0.0)(0) - truth0) < 1e-5 * rms);
  CHECK(std::abs(recover_task(a, d.g_freq, d.cfg.ts())(0) - truth1) < 1e-5 * rms);

  CHECK_THROWS_AS(recover_task(a, d.g_freq, 0.5 * d.cfg.ts()), std::invalid_argument);
  CHECK_THROWS_AS(recover_task(a, d.g_freq, 0.49 * block.duration()), std::invalid_argument);
}

TEST_CASE("shift by one sampling period leaves the error statistics unchanged") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 256);
  const FilterDesign d = scalar_design(m, 3, eta_schedule(3));
  ProcessSynthesizer synth(m.c_x, 256.0, 4.0);
  const double gamma = m.gamma.values.front()(0, 0).real();
  const CounterRng root(11);
  Moments e0, e1, diff;
  for (int t = 0; t < 2000; ++t) {
    CounterRng br = root.split(t).split(0);
    const ProcessBlock block = synth.draw(br);
    const RMatrix x = block.to_time_domain();
    const AcquisitionResult a = run_acquisition(
        block, [&](double f) { return d.analog_response(f); }, d.cfg, d.quantizer(true),
        root.split(t).split(1));
    const double a0 = recover_task(a, d.g_freq, 0.0)(0) - gamma * x(0, block.length / 2);
    const double a1 =
        recover_task(a, d.g_freq, d.cfg.ts())(0) - gamma * x(0, block.length / 2 + a.decimation);
    e0.add(a0 * a0);
    e1.add(a1 * a1);
    diff.add(a0 * a0 - a1 * a1);
  }
  CHECK(std::abs(diff.mean()) < 3.0 * diff.se());
  // Single-instant estimate agrees with the theory within its own error bar.
  const double theory = d.mse_theory;
  CHECK(e0.mean() > theory * 0.9);
  CHECK(e0.mean() < theory * 1.2);
}

TEST_CASE("Monte-Carlo MSE on the scalar scenario") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 256);
  const FilterDesign d = scalar_design(m, 4, eta_schedule(4));
  SimulationRun run;
  run.scenario_id = "scalar";
  run.model = m;
  run.design = d;
  run.n_trials = 1000;
  run.block_duration = 4096.0 / 8.0;
  run.seed = 12;
  run.record_trials = true;
  const SimulationReport dith = estimate_mse(run);
  CHECK(dith.trials.size() == 1000);
  CHECK(dith.std_error > 0.0);
  CHECK(dith.empirical_nmse >= d.nmse);
  CHECK(dith.empirical_nmse <= 1.15 * d.nmse);
  CHECK(dith.theory_nmse == d.nmse);
  CHECK(dith.overload_rate <= overload_probability_bound(d.cfg.eta));

  run.dithered = false;
  const SimulationReport plain = estimate_mse(run);
  CHECK(plain.empirical_nmse <= dith.empirical_nmse);

  // Same seed, same numbers.
  run.dithered = true;
  run.record_trials = false;
  const SimulationReport again = estimate_mse(run);
  CHECK(again.empirical_mse == dith.empirical_mse);
}

TEST_CASE("overload stays under five percent at a loading factor of two") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 256);
  SimulationRun run;
  run.model = m;
  run.design = scalar_design(m, 6, 2.0);
  run.n_trials = 200;
  run.block_duration = 4096.0 / 8.0;
  const SimulationReport r = estimate_mse(run);
  CHECK(r.overload_rate < 0.05);
  CHECK(r.overload_rate <= 0.25);
}

// Clipping correlates the error with the samples, so the orthogonality check
// uses a loading factor with negligible overload.
TEST_CASE("orthogonality residual shrinks with the trial count") {
  ScenarioSpec spec;
  spec.n_streams = 2;
  spec.m_antennas = 3;
  spec.f_nyq = 2.0;
  spec.grid_points = 128;
  const TaskModel m = build_scenario(spec);
  DesignOptions opt;
  opt.grid_points = 128;
  SimulationRun run;
  run.model = m;
  run.design = design_task_based(m, make_config(2, 2.0, 3, 4.5), opt);
  run.block_duration = 2048.0 / 8.0;
  run.n_trials = 100;
  const SimulationReport small = estimate_mse(run);
  run.n_trials = 1600;
  const SimulationReport large = estimate_mse(run);
  CHECK(large.orthogonality_std_error < 0.5 * small.orthogonality_std_error);
  CHECK(large.orthogonality_residual < 3.0 * large.orthogonality_std_error);
  CHECK(std::abs(large.empirical_nmse - run.design.nmse) < 3.0 * large.nmse_std_error);
}

TEST_CASE("a zero analog filter recovers nothing") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 256);
  FilterDesign d = scalar_design(m, 4, 2.75);
  for (auto& c : d.compression) c.setZero();
  for (auto& v : d.g_freq.values) v.setZero();
  d.gamma_q = 0.0;
  SimulationRun run;
  run.model = m;
  run.design = d;
  run.n_trials = 200;
  run.block_duration = 2048.0 / 8.0;
  const SimulationReport r = estimate_mse(run);
  CHECK(std::abs(r.empirical_nmse - 1.0) < 3.0 * r.nmse_std_error);
}

TEST_CASE("run validation") {
  const TaskModel m = scalar_scenario(2.0, 10.0, 64);
  SimulationRun run;
  run.model = m;
  run.design = scalar_design(m, 4, 2.75);
  run.n_trials = 99;
  CHECK_THROWS_AS(estimate_mse(run), std::invalid_argument);
  run.n_trials = 100;
  run.oversample_factor = 2.0;
  CHECK_THROWS_AS(estimate_mse(run), std::invalid_argument);
  run.oversample_factor = 4.0;
  run.design.prefilter_response.reset();
  CHECK_THROWS_AS(estimate_mse(run), std::invalid_argument);
}

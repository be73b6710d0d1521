// SPDX-License-Identifier: Apache-2.0
#include "taskadc/simulator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace taskadc {

namespace {

// In-place complex DFT of fixed length on an FFTW-aligned buffer.
class Dft {
 public:
  explicit Dft(std::size_t n) : n_(n), buf_(fftw_alloc_complex(n)) {
    if (buf_ == nullptr) throw std::bad_alloc();
    const int len = static_cast<int>(n);
    fwd_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Dft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Dft(const Dft&) = delete;
  Dft& operator=(const Dft&) = delete;

  std::size_t size() const { return n_; }
  cplx* data() { return reinterpret_cast<cplx*>(buf_); }
  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  std::size_t n_;
  fftw_complex* buf_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

// Responses at bins -k_max..k_max, stored at index k + k_max.
using BinResponses = std::vector<CMatrix>;

BinResponses sample_responses(const ProcessBlock& block, const std::function<CMatrix(double)>& r) {
  const long kmax = block.bins.empty() ? -1 : block.bins.back();
  BinResponses out;
  out.reserve(static_cast<std::size_t>(2 * kmax + 1));
  for (long k = -kmax; k <= kmax; ++k) out.push_back(r(block.bin_frequency(k)));
  return out;
}

// Spectrum of resp * x folded onto n_out bins, with the (-1)^k phase that
// puts t = 0 at the block center.
CMatrix fold(const ProcessBlock& block, const BinResponses& resp, std::size_t n_out) {
  const long kmax = block.bins.empty() ? -1 : block.bins.back();
  const Eigen::Index rows = resp.empty() ? 0 : resp.front().rows();
  CMatrix out = CMatrix::Zero(rows, static_cast<Eigen::Index>(n_out));
  const long n = static_cast<long>(n_out);
  for (long k = 0; k <= kmax; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const auto x = block.increments.col(k);
    const auto rp = static_cast<Eigen::Index>(k % n);
    out.col(rp) += sign * (resp[static_cast<std::size_t>(kmax + k)] * x);
    if (k == 0) continue;
    const auto rn = static_cast<Eigen::Index>(((-k) % n + n) % n);
    out.col(rn) += sign * (resp[static_cast<std::size_t>(kmax - k)] * x.conjugate());
  }
  return out;
}

// Real part of the inverse transform of each row.
RMatrix rows_to_time(const CMatrix& spec, Dft& dft) {
  const Eigen::Index n = spec.cols();
  RMatrix out(spec.rows(), n);
  for (Eigen::Index c = 0; c < spec.rows(); ++c) {
    cplx* b = dft.data();
    for (Eigen::Index i = 0; i < n; ++i) b[i] = spec(c, i);
    dft.backward();
    for (Eigen::Index i = 0; i < n; ++i) out(c, i) = b[i].real();
  }
  return out;
}

std::size_t decimation_factor(double grid_rate, double fs, std::size_t length) {
  if (!(fs > 0.0) || fs > grid_rate * (1.0 + 1e-12)) {
    throw std::invalid_argument("acquisition: fs must lie in (0, grid rate]");
  }
  const double ratio = grid_rate / fs;
  const double d = std::round(ratio);
  if (std::abs(ratio - d) > 1e-9 * ratio) {
    throw std::invalid_argument("acquisition: fs does not divide the simulation grid rate");
  }
  const auto dec = static_cast<std::size_t>(d);
  if (length % (2 * dec) != 0) {
    throw std::invalid_argument("acquisition: block length is not a multiple of twice the decimation");
  }
  return dec;
}

void set_interior(AcquisitionResult& a, double guard_fraction) {
  if (!(guard_fraction >= 0.0 && guard_fraction < 0.5)) {
    throw std::invalid_argument("acquisition: guard fraction must be in [0, 0.5)");
  }
  const std::size_t n = a.length();
  const auto g = static_cast<std::size_t>(std::ceil(guard_fraction * static_cast<double>(n)));
  a.interior_begin = std::min(g, n / 2);
  a.interior_end = std::max(n - g, n / 2 + 1);
}

AcquisitionResult acquire(const ProcessBlock& block, const BinResponses& h, const AdcConfig& cfg,
                          const QuantizerSpec& spec, const CounterRng& rng, double guard_fraction,
                          Dft& dft) {
  AcquisitionResult a;
  a.fs = cfg.fs;
  a.decimation = decimation_factor(block.grid_rate, cfg.fs, block.length);
  const std::size_t n = block.length / a.decimation;
  if (dft.size() != n) throw std::logic_error("acquire: transform length mismatch");

  a.clean = cfg.ts() * rows_to_time(fold(block, h, n), dft);
  a.z.resize(a.clean.rows(), a.clean.cols());
  set_interior(a, guard_fraction);
  a.degenerate = spec.degenerate();
  for (Eigen::Index c = 0; c < a.clean.rows(); ++c) {
    CounterRng r = rng.split(static_cast<std::uint64_t>(c));
    for (Eigen::Index i = 0; i < a.clean.cols(); ++i) {
      double v = a.clean(c, i);
      if (spec.dithered && spec.delta > 0.0) v += sample_dither(spec.delta, r);
      const auto ui = static_cast<std::size_t>(i);
      if (ui >= a.interior_begin && ui < a.interior_end && std::abs(v) >= spec.gamma) ++a.overloads;
      a.z(c, i) = quantize_midrise(v, spec);
    }
  }
  const double count = static_cast<double>(a.clean.rows()) *
                       static_cast<double>(a.interior_end - a.interior_begin);
  a.overload_rate = count > 0.0 ? static_cast<double>(a.overloads) / count : 0.0;
  return a;
}

// Digital filter at DFT bin r of a length-n block sampled at fs.
std::vector<CMatrix> digital_on_bins(const SpectralMatrixFunction& g, double fs, std::size_t n) {
  std::vector<CMatrix> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double f = wrap_to_baseband(static_cast<double>(r) * fs / static_cast<double>(n), fs);
    const CMatrix* v = g.find(f);
    out[r] = v ? *v : CMatrix::Zero(g.rows, g.cols);
  }
  return out;
}

RMatrix recover(const RMatrix& z, const std::vector<CMatrix>& g, Dft& dft) {
  const Eigen::Index n = z.cols();
  const Eigen::Index nt = g.front().rows();
  CMatrix zf(z.rows(), n);
  for (Eigen::Index c = 0; c < z.rows(); ++c) {
    cplx* b = dft.data();
    for (Eigen::Index i = 0; i < n; ++i) b[i] = z(c, i);
    dft.forward();
    for (Eigen::Index i = 0; i < n; ++i) zf(c, i) = b[i];
  }
  CMatrix sf(nt, n);
  for (Eigen::Index r = 0; r < n; ++r) sf.col(r) = g[static_cast<std::size_t>(r)] * zf.col(r);
  return rows_to_time(sf / static_cast<double>(n), dft);
}

}  // namespace

RMatrix ProcessBlock::to_time_domain() const {
  BinResponses id(bins.empty() ? 0 : 2 * bins.size() - 1,
                  CMatrix::Identity(channels(), channels()));
  Dft dft(length);
  return rows_to_time(fold(*this, id, length), dft);
}

ProcessSynthesizer::ProcessSynthesizer(const SpectralMatrixFunction& c_x, double duration,
                                       double oversample_factor) {
  c_x.validate();
  if (!(oversample_factor >= 1.0)) throw std::invalid_argument("synthesize: oversample must be >= 1");
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("synthesize: duration must be > 0");
  }
  f_max_ = std::max(std::abs(c_x.grid.f_lo), std::abs(c_x.grid.f_hi));
  grid_rate_ = oversample_factor * 2.0 * f_max_;
  const double len = std::round(duration * grid_rate_);
  if (len < 2.0 || std::fmod(len, 2.0) != 0.0) {
    throw std::invalid_argument("synthesize: block must hold an even number of grid samples");
  }
  length_ = static_cast<std::size_t>(len);
  const double t = len / grid_rate_;
  const auto kmax = static_cast<long>(std::floor(f_max_ * t * (1.0 + 1e-12)));
  if (2 * kmax + 1 < 64) {
    throw std::invalid_argument("synthesize: duration too short for 64 bins across the band");
  }
  if (2 * kmax >= static_cast<long>(length_)) {
    throw std::invalid_argument("synthesize: band does not fit below the grid Nyquist rate");
  }

  const SpectralMatrixFunction root = psd_sqrt(c_x);
  const Eigen::Index m = c_x.rows;
  scale_.resize(static_cast<std::size_t>(kmax + 1));
  for (long k = 0; k <= kmax; ++k) {
    const double f = static_cast<double>(k) / t;
    const double w = std::abs(f - f_max_) <= 1e-9 * f_max_ ? 0.5 : 1.0;
    CMatrix s = CMatrix::Zero(m, m);
    if (k == 0) {
      if (const CMatrix* c = c_x.find(0.0)) s = psd_sqrt(CMatrix(c->real().cast<cplx>()));
    } else if (const CMatrix* r = root.find(f)) {
      s = *r;
    }
    scale_[static_cast<std::size_t>(k)] = std::sqrt(w / t) * s;
  }
}

ProcessBlock ProcessSynthesizer::draw(CounterRng& rng) const {
  ProcessBlock b;
  b.grid_rate = grid_rate_;
  b.length = length_;
  const auto nb = static_cast<Eigen::Index>(scale_.size());
  const Eigen::Index m = scale_.front().rows();
  b.bins.resize(scale_.size());
  b.increments.resize(m, nb);
  const double h = std::sqrt(0.5);
  Eigen::VectorXcd g(m);
  for (Eigen::Index k = 0; k < nb; ++k) {
    b.bins[static_cast<std::size_t>(k)] = static_cast<long>(k);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (k == 0) {
        g(i) = rng.normal();
      } else {
        const double re = rng.normal();
        const double im = rng.normal();
        g(i) = cplx(h * re, h * im);
      }
    }
    b.increments.col(k) = scale_[static_cast<std::size_t>(k)] * g;
  }
  return b;
}

ProcessBlock synthesize_process(const SpectralMatrixFunction& c_x, double duration,
                                double oversample_factor, CounterRng& rng) {
  return ProcessSynthesizer(c_x, duration, oversample_factor).draw(rng);
}

double snap_sampling_rate(double fs, double grid_rate) {
  if (!(fs > 0.0) || !(grid_rate > 0.0)) throw std::invalid_argument("snap: rates must be > 0");
  const double d = std::max(1.0, std::round(grid_rate / fs));
  return grid_rate / d;
}

AcquisitionResult run_acquisition(const ProcessBlock& block, const AnalogFilter& h,
                                  const AdcConfig& cfg, const QuantizerSpec& spec,
                                  const CounterRng& rng, double guard_fraction) {
  cfg.validate();
  const std::size_t dec = decimation_factor(block.grid_rate, cfg.fs, block.length);
  const BinResponses resp = sample_responses(block, h);
  for (const auto& r : resp) {
    if (r.rows() != cfg.k_adcs || r.cols() != block.channels()) {
      throw std::invalid_argument("acquisition: filter must be K x M");
    }
  }
  Dft dft(block.length / dec);
  return acquire(block, resp, cfg, spec, rng, guard_fraction, dft);
}

RMatrix recover_task_series(const AcquisitionResult& acq, const SpectralMatrixFunction& g_freq) {
  if (g_freq.cols != acq.z.rows()) throw std::invalid_argument("recover: digital filter must be N x K");
  const std::size_t n = acq.length();
  Dft dft(n);
  return recover(acq.z, digital_on_bins(g_freq, acq.fs, n), dft);
}

Eigen::VectorXd recover_task(const AcquisitionResult& acq, const SpectralMatrixFunction& g_freq,
                             double t0) {
  const double m = t0 * acq.fs;
  const double mi = std::round(m);
  if (!std::isfinite(m) || std::abs(m - mi) > 1e-6) {
    throw std::invalid_argument("recover: t0 must be a whole number of sampling periods");
  }
  const long idx = static_cast<long>(acq.center()) + static_cast<long>(mi);
  if (idx < static_cast<long>(acq.interior_begin) || idx >= static_cast<long>(acq.interior_end)) {
    throw std::invalid_argument("recover: t0 outside the block interior");
  }
  return recover_task_series(acq, g_freq).col(idx);
}

double SimulationRun::grid_rate() const { return oversample_factor * 2.0 * model.f_max(); }

double SimulationRun::duration() const {
  return block_duration > 0.0 ? block_duration
                              : static_cast<double>(kDefaultBlockSamples) / grid_rate();
}

void SimulationRun::validate() const {
  model.validate();
  design.cfg.validate();
  if (n_trials < 100) throw std::invalid_argument("simulation: need at least 100 trials");
  if (!(oversample_factor >= 4.0)) throw std::invalid_argument("simulation: oversample must be >= 4");
  if (!design.prefilter_response) {
    throw std::invalid_argument("simulation: design lacks the analog filter response");
  }
  if (design.g_freq.values.empty()) throw std::invalid_argument("simulation: design lacks a digital filter");
  if (design.g_freq.rows != model.n_task || design.g_freq.cols != design.cfg.k_adcs) {
    throw std::invalid_argument("simulation: digital filter shape does not match the model");
  }
}

SimulationReport estimate_mse(const SimulationRun& run) {
  run.validate();
  const FilterDesign& d = run.design;
  const ProcessSynthesizer synth(run.model.c_x, run.duration(), run.oversample_factor);
  const std::size_t dec = decimation_factor(synth.grid_rate(), d.cfg.fs, synth.length());
  const std::size_t n = synth.length() / dec;
  const QuantizerSpec q = d.quantizer(run.dithered);

  CounterRng probe_rng(run.seed);
  const ProcessBlock shape = synth.draw(probe_rng);
  const BinResponses h = sample_responses(shape, [&](double f) { return d.analog_response(f); });
  const double t0 = d.t0;
  const BinResponses task = sample_responses(shape, [&](double f) -> CMatrix {
    const CMatrix* g = run.model.gamma.find(f);
    if (g == nullptr) return CMatrix::Zero(run.model.n_task, run.model.m_inputs);
    return std::polar(1.0, -2.0 * std::numbers::pi * f * t0) * (*g);
  });
  const std::vector<CMatrix> g = digital_on_bins(d.g_freq, d.cfg.fs, n);
  Dft dft(n);

  SimulationReport rep;
  rep.scenario_id = run.scenario_id;
  rep.seed = run.seed;
  rep.n_trials = run.n_trials;
  rep.dithered = run.dithered;
  rep.fs = d.cfg.fs;
  rep.theory_nmse = d.nmse;

  const Eigen::Index nt = run.model.n_task;
  const Eigen::Index k = d.cfg.k_adcs;
  RMatrix orth_sum = RMatrix::Zero(nt, k);
  RMatrix orth_sq = RMatrix::Zero(nt, k);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t overloads = 0;
  double samples = 0.0;
  const CounterRng root(run.seed);
  for (std::size_t trial = 0; trial < run.n_trials; ++trial) {
    const CounterRng trng = root.split(trial);
    CounterRng block_rng = trng.split(0);
    const ProcessBlock block = synth.draw(block_rng);
    const AcquisitionResult acq = acquire(block, h, d.cfg, q, trng.split(1), run.guard_fraction, dft);
    const RMatrix est = recover(acq.z, g, dft);
    const RMatrix truth = rows_to_time(fold(block, task, n), dft);

    const auto b = static_cast<Eigen::Index>(acq.interior_begin);
    const auto len = static_cast<Eigen::Index>(acq.interior_end - acq.interior_begin);
    const RMatrix err = truth.middleCols(b, len) - est.middleCols(b, len);
    const double sq = err.colwise().squaredNorm().mean();
    const RMatrix orth = err * acq.z.middleCols(b, len).transpose() / static_cast<double>(len);
    sum += sq;
    sum_sq += sq * sq;
    orth_sum += orth;
    orth_sq += orth.cwiseAbs2();
    overloads += acq.overloads;
    samples += static_cast<double>(k) * static_cast<double>(len);
    if (run.record_trials) rep.trials.push_back({trial, sq, acq.overloads});
  }

  const auto nd = static_cast<double>(run.n_trials);
  rep.empirical_mse = sum / nd;
  const double var = std::max(sum_sq / nd - rep.empirical_mse * rep.empirical_mse, 0.0) * nd / (nd - 1.0);
  rep.std_error = std::sqrt(var / nd);
  rep.empirical_nmse = rep.empirical_mse / d.task_energy;
  rep.nmse_std_error = rep.std_error / d.task_energy;
  rep.overload_rate = samples > 0.0 ? static_cast<double>(overloads) / samples : 0.0;

  const RMatrix mean = orth_sum / nd;
  const RMatrix evar = ((orth_sq / nd - mean.cwiseAbs2()).cwiseMax(0.0)) * (nd / (nd - 1.0));
  rep.orthogonality_residual = mean.norm();
  rep.orthogonality_std_error = std::sqrt(evar.sum() / nd);
  return rep;
}

}  // namespace taskadc

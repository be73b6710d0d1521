// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "taskadc/filter_design.hpp"
#include "taskadc/scenario.hpp"
#include "test_support.hpp"

using namespace taskadc;
using taskadc::testing::perturbed_mse;
using taskadc::testing::random_task_model;

namespace {

// Unit task on a band of width fs: Gamma_bar == 1 on the base band.
TaskModel unit_scalar(double fs, std::size_t n = 64) {
  const FrequencyGrid g = make_frequency_grid(-0.5 * fs, 0.5 * fs, n);
  return make_task_model(constant_spectrum(g, CMatrix::Constant(1, 1, 1.0), SpectrumKind::cross_psd),
                         constant_spectrum(g, CMatrix::Constant(1, 1, 1.0), SpectrumKind::psd));
}

double support_constraint(const FilterDesign& d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d.base_grid.size(); ++i)
    acc += d.base_grid.weights[i] * d.sigma_h[i].squaredNorm();
  return kappa_bar(d.cfg.eta, d.cfg.bits) * d.cfg.ts() / d.cfg.k_adcs * acc;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK(make_config(2, 1e6, 4).eta == 2.75);
  CHECK(make_config(2, 1e6, 4, 3.0).eta == 3.0);
  CHECK(make_config(2, 1e6, 4).rate() == 8e6);
  CHECK_THROWS_AS(make_config(0, 1e6, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_config(1, 0.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_config(1, 1e6, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_config(1, 1e6, 4, -1.0), std::invalid_argument);
}

TEST_CASE("water-filling level for a flat scalar spectrum") {
  const double fs = 2.0;
  const FrequencyGrid g = make_frequency_grid(-1.0, 1.0, 32);
  std::vector<Eigen::VectorXd> ones(g.size(), Eigen::VectorXd::Ones(1));
  // Analytic solve: kappa (zeta - 1) / 4^b = 1.
  const double z1 = solve_waterfill_level(ones, g, make_config(1, fs, 1, 2.0), 1);
  CHECK(z1 == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  const double z4 = solve_waterfill_level(ones, g, make_config(1, fs, 4, 2.0), 1);
  CHECK(z4 == doctest::Approx(1.0 + 256.0 / kappa_bar(2.0, 4)).epsilon(1e-12));

  std::vector<Eigen::VectorXd> twos(g.size(), Eigen::VectorXd::Constant(1, 2.0));
  CHECK(solve_waterfill_level(twos, g, make_config(1, fs, 4, 2.0), 1) ==
        doctest::Approx(0.5 * z4).epsilon(1e-12));

  std::vector<Eigen::VectorXd> zeros(g.size(), Eigen::VectorXd::Zero(1));
  CHECK_THROWS_AS(solve_waterfill_level(zeros, g, make_config(1, fs, 4, 2.0), 1),
                  std::invalid_argument);
}

TEST_CASE("water-filling level on varying spectra meets the constraint") {
  const FrequencyGrid g = make_frequency_grid(-0.5, 0.5, 200);
  std::vector<Eigen::VectorXd> sv(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    Eigen::VectorXd s(3);
    const double f = g.points[i];
    s << 3.0 + f, 1.0 + 0.5 * f, 0.05 + 0.04 * f;
    sv[i] = s;
  }
  for (int b : {1, 3, 8}) {
    const AdcConfig cfg = make_config(2, 1.0, b);
    const double z = solve_waterfill_level(sv, g, cfg, 3);
    // Independent evaluation of the constraint, only the first K modes.
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (int j = 0; j < 2; ++j) acc += g.weights[i] * std::max(z * sv[i](j) - 1.0, 0.0);
    const double lhs = kappa_bar(cfg.eta, b) * cfg.ts() / 2.0 * acc / std::ldexp(1.0, 2 * b);
    CHECK(lhs == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("equalize_diagonal") {
  CMatrix a = CMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 3.0;
  const CMatrix u = equalize_diagonal(a);
  const CMatrix b = u * a * u.adjoint();
  CHECK(std::abs(b(0, 0) - 2.0) < 1e-12);
  CHECK(std::abs(b(1, 1) - 2.0) < 1e-12);

  const CMatrix eye = equalize_diagonal(CMatrix::Identity(3, 3) * 2.0);
  CHECK(((eye * eye.adjoint()) - CMatrix::Identity(3, 3)).norm() < 1e-12);

  CounterRng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    CMatrix x(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) x(i, j) = cplx(rng.normal(), rng.normal());
    const CMatrix p = x * x.adjoint();
    const CMatrix w = equalize_diagonal(p);
    CHECK((w * w.adjoint() - CMatrix::Identity(5, 5)).norm() < 1e-12);
    const CMatrix q = w * p * w.adjoint();
    const double target = p.trace().real() / 5.0;
    for (int i = 0; i < 5; ++i) CHECK(std::abs(q(i, i).real() - target) < 1e-12 * p.trace().real());
  }
  CMatrix bad = CMatrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(equalize_diagonal(bad), std::invalid_argument);
}

TEST_CASE("scalar flat design matches the analytic values") {
  const double fs = 2.0;
  const TaskModel m = unit_scalar(fs);
  for (int b : {1, 4, 16}) {
    const AdcConfig cfg = make_config(1, fs, b, 2.0);
    const double kb = kappa_bar(2.0, b);
    const double expect = 1.0 - 1.0 / (1.0 + kb / std::ldexp(1.0, 2 * b));
    const FilterDesign d = design_task_based(m, cfg);
    CHECK(d.nmse == doctest::Approx(expect).epsilon(1e-12));
    const FilterDesign s = design_filters(stack_task(m, fs, 64), cfg);
    CHECK(s.nmse == doctest::Approx(expect).epsilon(1e-12));
    // Flat designed gain (zeta - 1) / 4^b.
    for (const auto& sh : s.sigma_h)
      CHECK(sh(0) * sh(0) == doctest::Approx((s.zeta - 1.0) / std::ldexp(1.0, 2 * b)).epsilon(1e-12));
  }
  CHECK(design_task_based(m, make_config(1, fs, 1, 2.0)).nmse == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(design_task_based(m, make_config(1, fs, 16, 2.0)).nmse < 1e-6);
}

TEST_CASE("scalar digital filter is a Wiener shrinkage") {
  const double fs = 2.0;
  const TaskModel m = unit_scalar(fs);
  const AdcConfig cfg = make_config(1, fs, 3);
  const StackedSpectrum gb = stack_task(m, fs, 64);
  const FilterDesign d = design_filters(gb, cfg);
  const double q = 0.25 * d.delta * d.delta;
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) {
    const cplx h = d.h_bar->blocks[i](0, 0);
    const cplx s = gb.blocks[i](0, 0) * std::conj(h);
    const cplx expect = s / (cfg.ts() * std::norm(h) + q);
    CHECK(std::abs(d.g_freq.values[i](0, 0) - expect) < 1e-12 * std::abs(expect));
  }
}

TEST_CASE("design invariants on random scenarios") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const Eigen::Index n = 1 + seed % 3, m = 2 + seed;
    const TaskModel model = random_task_model(seed, n, m, 128);
    for (double fs : {1.3, 0.6}) {
      for (int k = 1; k <= n; ++k) {
        const AdcConfig cfg = make_config(k, fs, 3);
        const StackedSpectrum gb = stack_task(model, fs, 128);
        const FilterDesign d = design_filters(gb, cfg);
        CHECK(support_constraint(d) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(d.nmse >= 0.0);
        CHECK(d.nmse <= 1.0 + 1e-9);
        // General and diagonal forms agree for the optimal filter.
        CHECK(std::abs(diagonal_form_mse(d) - d.mse_theory) <= 1e-9 * d.mse_theory);
        // Equal quantizer-input variance on every row at every point.
        for (const auto& hb : d.h_bar->blocks) {
          const Eigen::VectorXd dg = (hb * hb.adjoint()).diagonal().real();
          CHECK(dg.maxCoeff() - dg.minCoeff() <= 1e-9 * std::max(dg.sum(), 1e-300));
        }
        // The alias-sum path agrees with the stacked path.
        DesignOptions opt;
        opt.grid_points = 128;
        const FilterDesign t = design_task_based(model, cfg, opt);
        CHECK(t.nmse == doctest::Approx(d.nmse).epsilon(1e-9));
        CHECK(t.zeta == doctest::Approx(d.zeta).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("perturbing the designed singular values never helps") {
  for (std::uint64_t seed = 11; seed <= 12; ++seed) {
    const TaskModel model = random_task_model(seed, 3, 5, 96);
    const AdcConfig cfg = make_config(2, 0.8, 3);
    const StackedSpectrum gb = stack_task(model, cfg.fs, 96);
    const FilterDesign d = design_filters(gb, cfg);
    CounterRng rng(seed);
    for (int t = 0; t < 10; ++t) {
      const double mse = perturbed_mse(gb, d, 0.3, rng);
      CHECK(mse >= d.mse_theory - 1e-10 * d.task_energy);
    }
  }
}

TEST_CASE("alternative digital filters never help") {
  const TaskModel model = random_task_model(21, 2, 4, 64);
  const AdcConfig cfg = make_config(2, 0.7, 4);
  const StackedSpectrum gb = stack_task(model, cfg.fs, 64);
  const FilterDesign d = design_filters(gb, cfg);
  const double q = 0.25 * d.delta * d.delta;
  const double ts = cfg.ts();
  // MSE(G) = E - 2 Ts Re tr int G S^H + Ts tr int G C_z G^H
  auto quadratic = [&](const std::vector<CMatrix>& g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < gb.blocks.size(); ++i) {
      const CMatrix& h = d.h_bar->blocks[i];
      const CMatrix s = gb.blocks[i] * h.adjoint();
      CMatrix cz = ts * h * h.adjoint();
      cz.diagonal().array() += q;
      acc += gb.base_grid.weights[i] * ts *
             (-2.0 * (g[i] * s.adjoint()).trace().real() + (g[i] * cz * g[i].adjoint()).trace().real());
    }
    return d.task_energy + acc;
  };
  const double opt = quadratic(d.g_freq.values);
  CHECK(opt == doctest::Approx(d.mse_theory).epsilon(1e-9));
  CounterRng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<CMatrix> g = d.g_freq.values;
    for (auto& x : g)
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
          x(r, c) += 0.05 * std::abs(x(r, c)) * cplx(rng.normal(), rng.normal());
    CHECK(quadratic(g) >= opt);
  }
}

TEST_CASE("zero analog filter captures nothing") {
  const TaskModel model = random_task_model(3, 2, 3, 32);
  const AdcConfig cfg = make_config(2, 1.0, 4);
  const StackedSpectrum gb = stack_task(model, 1.0, 32);
  StackedSpectrum h = gb;
  for (auto& b : h.blocks) b = CMatrix::Zero(2, gb.cols());
  const MseResult r = theoretical_mse(h, gb, cfg);
  CHECK(r.nmse == doctest::Approx(1.0).epsilon(1e-14));
  const auto g = design_digital_filter(h, gb, cfg);
  for (const auto& x : g.values) CHECK(x.norm() == 0.0);
}

TEST_CASE("fine quantization recovers the task on the range of the analog filter") {
  const TaskModel model = random_task_model(8, 2, 3, 64);
  const AdcConfig cfg = make_config(2, 1.0, 24, 2.0);
  const StackedSpectrum gb = stack_task(model, 1.0, 64);
  const FilterDesign d = design_filters(gb, cfg);
  CHECK(d.nmse < 1e-9);
  // G H_bar reproduces Gamma_bar once H_bar keeps all N modes.
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) {
    const CMatrix r = d.g_freq.values[i] * d.h_bar->blocks[i] * cfg.ts();
    CHECK((r - gb.blocks[i]).norm() < 1e-5 * gb.blocks[i].norm());
  }
}

TEST_CASE("large resolution activates every mode up to K") {
  const TaskModel model = random_task_model(9, 3, 4, 64);
  const StackedSpectrum gb = stack_task(model, 1.0, 64);
  const FilterDesign d = design_filters(gb, make_config(3, 1.0, 16));
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) CHECK(d.active_modes(i) == 3);
  const FilterDesign coarse = design_filters(gb, make_config(3, 1.0, 1));
  std::size_t fewer = 0;
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) fewer += coarse.active_modes(i) < 3;
  CHECK(fewer > 0);
}

TEST_CASE("Nyquist analog filter") {
  const TaskModel model = random_task_model(10, 2, 3, 64);
  const AdcConfig cfg = make_config(2, 1.0, 4);
  const StackedSpectrum gb = stack_task(model, 1.0, 64);
  const FilterDesign d = design_filters(gb, cfg);
  const auto h = nyquist_analog_filter(d, model.c_x);
  const auto l = psd_sqrt(model.c_x);
  for (std::size_t i = 0; i < h.values.size(); ++i)
    CHECK((h.values[i] * l.values[i] - d.h_bar->blocks[i]).norm() < 1e-9 * d.h_bar->blocks[i].norm());

  // Rank-deficient input: null-space columns vanish.
  const FrequencyGrid g = make_frequency_grid(-0.5, 0.5, 16);
  CMatrix c = CMatrix::Zero(2, 2);
  c(0, 0) = 4.0;
  CMatrix sx = CMatrix::Zero(1, 2);
  sx(0, 0) = 2.0;
  const TaskModel rd = make_task_model(constant_spectrum(g, sx, SpectrumKind::cross_psd),
                                       constant_spectrum(g, c, SpectrumKind::psd));
  const FilterDesign dr = design_filters(stack_task(rd, 1.0, 16), make_config(1, 1.0, 4));
  const auto hr = nyquist_analog_filter(dr, rd.c_x);
  for (std::size_t i = 0; i < hr.values.size(); ++i) {
    CHECK(std::abs(hr.values[i](0, 1)) == 0.0);
    // Scalar algebra: |H| = Sigma / sqrt(C_x).
    CHECK(std::abs(hr.values[i](0, 0)) == doctest::Approx(dr.sigma_h[i](0) / 2.0).epsilon(1e-12));
  }

  const FilterDesign aliased = design_filters(stack_task(model, 0.6, 32), make_config(1, 0.6, 4));
  CHECK_THROWS_AS(nyquist_analog_filter(aliased, model.c_x), std::invalid_argument);
}

TEST_CASE("monotone in bits and in K") {
  ScenarioSpec spec;
  spec.grid_points = 256;
  const TaskModel m = build_scenario(spec);
  DesignOptions opt;
  opt.grid_points = 256;
  opt.keep_filters = false;
  double prev = 2.0;
  for (int b = 1; b <= 16; ++b) {
    const double x = design_task_based(m, make_config(4, spec.f_nyq, b), opt).nmse;
    CHECK(x <= prev * (1.0 + 1e-12));
    prev = x;
  }
  prev = 2.0;
  const int kmax = max_rank_bound(m, spec.f_nyq, 256);
  for (int k = 1; k <= kmax; ++k) {
    const double x = design_task_based(m, make_config(k, spec.f_nyq, 4), opt).nmse;
    CHECK(x <= prev * (1.0 + 1e-12));
    prev = x;
  }
}

TEST_CASE("scaling the task") {
  const TaskModel m = random_task_model(14, 2, 3, 64);
  const AdcConfig cfg = make_config(2, 0.9, 12);
  const StackedSpectrum gb = stack_task(m, cfg.fs, 64);
  StackedSpectrum scaled = gb;
  const double c = 3.5;
  for (auto& b : scaled.blocks) b *= c;
  const FilterDesign a = design_filters(gb, cfg);
  const FilterDesign s = design_filters(scaled, cfg);
  CHECK(s.mse_theory == doctest::Approx(c * c * a.mse_theory).epsilon(1e-9));
  CHECK(s.nmse == doctest::Approx(a.nmse).epsilon(1e-9));
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) CHECK(s.active_modes(i) == a.active_modes(i));
  bool all_active = true;
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) all_active = all_active && a.active_modes(i) == 2;
  REQUIRE(all_active);
  CHECK(s.zeta == doctest::Approx(a.zeta / c).epsilon(1e-9));
}

TEST_CASE("rank bound") {
  const TaskModel one = random_task_model(2, 1, 3, 32);
  CHECK(max_rank_bound(stack_task(one, 1.0, 32)) == 1);
  CHECK(max_rank_bound(one, 1.0, 32) == 1);
  ScenarioSpec spec;
  spec.grid_points = 64;
  const TaskModel mf = build_scenario(spec);
  CHECK(max_rank_bound(stack_task(mf, spec.f_nyq, 64)) <= 4);
  StackedSpectrum z = stack_task(one, 1.0, 32);
  for (auto& b : z.blocks) b.setZero();
  CHECK(max_rank_bound(z) == 0);
}

TEST_CASE("analog recovery optimality test") {
  CHECK(analog_recovery_is_optimal(3.0 * RMatrix::Identity(4, 4)));
  RMatrix d = RMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = 2.0;
  CHECK_FALSE(analog_recovery_is_optimal(d));
  CHECK(analog_recovery_is_optimal(task_covariance(isotropic_scenario(3, 1.0, 0.5, 32))));
  RMatrix asym = RMatrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(analog_recovery_is_optimal(asym), std::invalid_argument);
}

TEST_CASE("isotropic task makes the optimal analog filter proportional to the task filter") {
  const TaskModel m = isotropic_scenario(3, 1.0, 0.5, 32);
  const StackedSpectrum gb = stack_task(m, 1.0, 32);
  const FilterDesign d = design_filters(gb, make_config(3, 1.0, 4));
  for (std::size_t i = 0; i < gb.blocks.size(); ++i) {
    const CMatrix hh = d.h_bar->blocks[i] * d.h_bar->blocks[i].adjoint();
    const CMatrix gg = gb.blocks[i] * gb.blocks[i].adjoint();
    const cplx ratio = hh(0, 0) / gg(0, 0);
    CHECK((hh - ratio * gg).norm() < 1e-9 * hh.norm());
  }
}

TEST_CASE("K larger than M is rejected") {
  const TaskModel m = random_task_model(2, 1, 2, 16);
  CHECK_THROWS_AS(design_task_based(m, make_config(3, 1.0, 4)), std::invalid_argument);
  CHECK_THROWS_AS(design_filters(stack_task(m, 1.0, 16), make_config(3, 1.0, 4)),
                  std::invalid_argument);
}

TEST_CASE("real analog filter for real processes") {
  ScenarioSpec spec;
  spec.grid_points = 128;
  const TaskModel m = build_scenario(spec);
  DesignOptions opt;
  opt.grid_points = 128;
  for (double ratio : {1.0, 0.63}) {
    const FilterDesign d = design_task_based(m, make_config(3, ratio * spec.f_nyq, 4), opt);
    REQUIRE(d.h);
    CHECK(hermitian_symmetry_defect(*d.h) < 1e-10 * d.h->values.front().norm());
    CHECK(hermitian_symmetry_defect(d.g_freq) < 1e-10 * d.g_freq.values.front().norm());
  }
}

TEST_CASE("cross stack reproduces the alias sum of cross powers") {
  const TaskModel model = random_task_model(21, 2, 3, 64);
  for (double fs : {0.07, 0.3, 1.4}) {
    for (auto pre : {Prefilter::task, Prefilter::identity}) {
      const auto sums = detail::alias_sums(model, pre, fs, 64, 0.0, true);
      const FrequencyGrid& src = model.c_x.grid;
      for (std::size_t i = 0; i < sums.grid.size(); i += 7) {
        const Eigen::Index p = sums.gram[i].rows();
        CMatrix direct = CMatrix::Zero(p, p);
        for (int k = -sums.upsilon; k <= sums.upsilon; ++k) {
          const auto c = src.locate(sums.grid.points[i] - k * fs);
          if (!c) continue;
          const CMatrix right = pre == Prefilter::task ? CMatrix(model.gamma.values[*c].adjoint())
                                                       : CMatrix(CMatrix::Identity(3, 3));
          const CMatrix q = model.gamma.values[*c] * model.c_x.values[*c] * right;
          direct += q.adjoint() * q;
        }
        const CMatrix stacked = sums.cross_stack[i].adjoint() * sums.cross_stack[i];
        CHECK((stacked - direct).norm() <= 1e-12 * std::max(direct.norm(), 1.0));
      }
    }
  }
}

TEST_CASE("cancellation-free task-prefilter MSE matches the direct form") {
  for (std::uint64_t seed : {3u, 4u}) {
    const TaskModel model = random_task_model(seed, 3, 4, 64);
    for (double fs : {0.45, 1.3}) {
      for (int b : {2, 6}) {
        const AdcConfig cfg = make_config(2, fs, b);
        const auto sums = detail::alias_sums(model, Prefilter::task, fs, 64);
        const auto modes = detail::gram_modes(sums.gram);
        const auto core = detail::analog_core(sums.grid, modes, cfg, 4 * (2 * sums.upsilon + 1), 3);
        std::vector<CMatrix> hh, s;
        for (std::size_t i = 0; i < core.compression.size(); ++i) {
          const CMatrix& d = core.compression[i];
          hh.push_back(d * sums.gram[i] * d.adjoint());
          s.push_back(sums.cross[i] * d.adjoint());
        }
        const auto p = detail::prop1(sums.grid, fs, hh, s, sums.energy, cfg, false);
        const double direct = detail::task_prefilter_mse(sums.grid, fs, sums.gram, core.compression, p.delta);
        CHECK(direct == doctest::Approx(p.mse).epsilon(1e-9));
      }
    }
  }
  CHECK_THROWS_AS(detail::task_prefilter_mse(FrequencyGrid{}, 1.0, {}, {}, 0.0), std::invalid_argument);
}

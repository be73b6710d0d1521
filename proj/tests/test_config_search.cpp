// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "taskadc/config_search.hpp"
#include "taskadc/scenario.hpp"
#include "test_support.hpp"

using namespace taskadc;
using taskadc::testing::random_task_model;

namespace {

DesignOptions small(std::size_t n = 128) {
  DesignOptions o;
  o.grid_points = n;
  return o;
}

TaskModel small_matched_filter(std::size_t n = 128) {
  ScenarioSpec spec;
  spec.n_streams = 2;
  spec.m_antennas = 4;
  spec.f_nyq = 1.0;
  spec.sigma_phi = 0.3;
  spec.grid_points = n;
  return build_scenario(spec);
}

}  // namespace

TEST_CASE("architecture names") {
  CHECK(architecture_from_string("task") == Architecture::task_based);
  CHECK(architecture_from_string("analog_recovery") == Architecture::analog_recovery);
  CHECK(architecture_from_string("digital") == Architecture::digital_recovery);
  CHECK(to_string(Architecture::digital_recovery) == "digital_recovery");
  CHECK_THROWS_AS(architecture_from_string("hybrid"), std::invalid_argument);
  const TaskModel m = small_matched_filter(16);
  CHECK(architecture_adcs(Architecture::analog_recovery, m, 1) == 2);
  CHECK(architecture_adcs(Architecture::digital_recovery, m, 1) == 4);
  CHECK(architecture_adcs(Architecture::task_based, m, 1) == 1);
}

TEST_CASE("shifted task design") {
  const TaskModel m = small_matched_filter();
  const AdcConfig cfg = make_config(2, 0.7, 4);
  const FilterDesign base = design_task_based(m, cfg, small());
  const FilterDesign zero = shifted_task_design(m, 0.0, cfg, small());
  CHECK(zero.nmse == base.nmse);
  const FilterDesign period = shifted_task_design(m, cfg.ts(), cfg, small());
  CHECK(period.nmse == doctest::Approx(base.nmse).epsilon(1e-9));
  const FilterDesign mid = shifted_task_design(m, 0.5 * cfg.ts(), cfg, small());
  CHECK(mid.nmse > base.nmse);
  CHECK(mid.t0 == 0.5 * cfg.ts());

  // Above the Nyquist rate with fine quantization the instant does not matter.
  const AdcConfig fine = make_config(2, 1.25, 20);
  const double ref = shifted_task_design(m, 0.0, fine, small()).nmse;
  for (double u : {0.1, 0.37, 0.5, 0.9}) {
    CHECK(std::abs(shifted_task_design(m, u * fine.ts(), fine, small()).nmse - ref) < 1e-6);
  }
}

TEST_CASE("time-averaged nmse") {
  const TaskModel m = small_matched_filter();
  // Oversampled and finely quantized: flat profile.
  const AdcConfig over = make_config(2, 4.0, 14);
  const double t0 = design_task_based(m, over, small()).nmse;
  const double avg = time_averaged_nmse(m, over, 16, 128);
  CHECK(std::abs(avg - t0) < 1e-6);

  // Sub-Nyquist: off-sample instants are worse.
  const AdcConfig sub = make_config(2, 0.6, 4);
  const double sub0 = design_task_based(m, sub, small()).nmse;
  const double sub_avg = time_averaged_nmse(m, sub, 16, 128);
  CHECK(sub_avg > sub0 * 1.01);

  // Refinement and the closed form.
  const double doubled = time_averaged_nmse(m, sub, 32, 128);
  CHECK(std::abs(doubled - sub_avg) < 1e-3 * sub_avg);
  const double exact = time_averaged_nmse_exact(m, sub, 128);
  CHECK(exact == doctest::Approx(sub_avg).epsilon(1e-9));
  CHECK(converged_time_average(m, sub, 16, 1e-3, 1024, 128) == doctest::Approx(exact).epsilon(1e-3));

  // The closed form also matches for the baselines.
  for (auto arch : {Architecture::analog_recovery, Architecture::digital_recovery}) {
    const AdcConfig c = make_config(architecture_adcs(arch, m, 2), 0.45, 3);
    CHECK(time_averaged_nmse_exact(m, c, 128, arch) ==
          doctest::Approx(time_averaged_nmse(m, c, 16, 128, arch)).epsilon(1e-9));
  }
}

TEST_CASE("baseline designs") {
  const TaskModel iso = isotropic_scenario(3, 1.0, 0.5, 64);
  for (int b : {1, 4, 9}) {
    const AdcConfig cfg = make_config(3, 1.0, b);
    const double task = baseline_design(iso, cfg, Architecture::task_based, small(64)).nmse;
    const double analog = baseline_design(iso, cfg, Architecture::analog_recovery, small(64)).nmse;
    CHECK(std::abs(analog - task) <= 1e-9 * task);
  }

  Eigen::VectorXd g(3);
  g << 0.2, 0.5, 0.9;
  const TaskModel uneven = diagonal_task_scenario(g, 1.0, 64);
  const AdcConfig cfg = make_config(3, 1.0, 3);
  CHECK(baseline_design(uneven, cfg, Architecture::analog_recovery, small(64)).nmse >
        baseline_design(uneven, cfg, Architecture::task_based, small(64)).nmse * (1.0 + 1e-6));

  const TaskModel m = small_matched_filter();
  double prev = 2.0;
  for (int b : {2, 8, 14, 20}) {
    const double x = baseline_design(m, make_config(4, 1.0, b), Architecture::digital_recovery, small()).nmse;
    CHECK(x < prev);
    prev = x;
  }
  CHECK(prev < 1e-6);

  CHECK_THROWS_AS(baseline_design(m, make_config(3, 1.0, 4), Architecture::digital_recovery),
                  std::invalid_argument);
  CHECK_THROWS_AS(baseline_design(m, make_config(1, 1.0, 4), Architecture::analog_recovery),
                  std::invalid_argument);

  // Baselines carry the filters the simulator needs.
  const FilterDesign d = baseline_design(m, make_config(4, 1.0, 4), Architecture::digital_recovery, small());
  REQUIRE(d.prefilter_response);
  CHECK(d.g_freq.rows == 2);
  CHECK(d.g_freq.cols == 4);
}

TEST_CASE("ordering of the architectures") {
  const TaskModel m = small_matched_filter();
  for (int b = 1; b <= 12; b += 3) {
    const double t = baseline_design(m, make_config(2, 1.0, b), Architecture::task_based, small()).nmse;
    const double a = baseline_design(m, make_config(2, 1.0, b), Architecture::analog_recovery, small()).nmse;
    const double d = baseline_design(m, make_config(4, 1.0, b), Architecture::digital_recovery, small()).nmse;
    CHECK(t <= a * (1.0 + 1e-12));
    CHECK(d <= t * (1.0 + 1e-12));
  }
}

TEST_CASE("rate search table and best entry") {
  const TaskModel m = random_task_model(31, 2, 3, 128);
  SearchSpec spec;
  spec.rate_budget = 6.0;
  spec.grid_points = 128;
  const SearchResult r = rate_search(m, spec);
  CHECK(r.table.size() == 2 * 16);
  double best = INFINITY;
  for (const auto& e : r.table) {
    CHECK(e.fs * e.k * e.b == doctest::Approx(6.0).epsilon(1e-14));
    if (!e.evaluated) continue;
    CHECK(e.nmse >= e.nmse_t0_0 * (1.0 - 1e-9));
    best = std::min(best, e.nmse);
  }
  CHECK(r.best.nmse == best);
  CHECK(r.best.evaluated);

  const SearchResult again = rate_search(m, spec);
  REQUIRE(again.table.size() == r.table.size());
  for (std::size_t i = 0; i < r.table.size(); ++i) CHECK(again.table[i].nmse == r.table[i].nmse);
}

TEST_CASE("rate search regimes") {
  const TaskModel m = random_task_model(31, 2, 3, 128);
  const double f_nyq = 1.0;
  SearchSpec spec;
  spec.grid_points = 128;

  spec.rate_budget = 1e4;
  const SearchResult huge = rate_search(m, spec);
  CHECK(huge.best.b == 16);
  CHECK(huge.best.k == max_rank_bound(m, f_nyq, 128));
  CHECK(huge.best.fs > 10.0 * f_nyq);

  spec.rate_budget = 1.5;  // below 2 f_nyq: any K > 1 is sub-Nyquist
  const SearchResult tight = rate_search(m, spec);
  CHECK(tight.best.fs < f_nyq);

  spec.rate_budget = 2.0;
  spec.k_range = {1};
  spec.b_range = {4};
  const SearchResult single = rate_search(m, spec);
  CHECK(single.table.size() == 1);
  CHECK(single.best.k == 1);
  CHECK(single.best.b == 4);
  CHECK(single.best.fs == 0.5);

  spec.rate_budget = 0.0;
  CHECK_THROWS_AS(rate_search(m, spec), std::invalid_argument);
}

TEST_CASE("rate search skips cells above the rank bound") {
  Eigen::VectorXd g(3);
  g << 1.0, 1.0, 0.0;
  const TaskModel m = diagonal_task_scenario(g, 1.0, 64);
  SearchSpec spec;
  spec.rate_budget = 12.0;
  spec.grid_points = 64;
  spec.b_range = {2, 3};
  const SearchResult r = rate_search(m, spec);
  for (const auto& e : r.table) CHECK(e.evaluated == (e.k <= 2));
  CHECK(r.best.k <= 2);
}

TEST_CASE("midpoint averaging agrees with the closed form in the search") {
  const TaskModel m = small_matched_filter(64);
  SearchSpec spec;
  spec.rate_budget = 3.0;
  spec.grid_points = 64;
  spec.b_range = {2, 3, 4};
  const SearchResult exact = rate_search(m, spec);
  spec.averaging = TimeAveraging::midpoint;
  spec.n_t0 = 32;
  const SearchResult mid = rate_search(m, spec);
  for (std::size_t i = 0; i < exact.table.size(); ++i)
    if (exact.table[i].evaluated)
      CHECK(mid.table[i].nmse == doctest::Approx(exact.table[i].nmse).epsilon(1e-6));
}

TEST_CASE("minimum budget") {
  const TaskModel m = small_matched_filter(64);
  SearchSpec spec;
  spec.grid_points = 64;
  const auto r = minimum_budget(m, spec, 0.05, 0.1, 100.0, 1e-3);
  REQUIRE(r);
  spec.rate_budget = *r;
  CHECK(rate_search(m, spec).best.nmse <= 0.05);
  spec.rate_budget = *r / 1.01;
  CHECK(rate_search(m, spec).best.nmse > 0.05);
  CHECK_FALSE(minimum_budget(m, spec, 1e-30, 0.1, 1.0));
  CHECK_THROWS_AS(minimum_budget(m, spec, 0.05, 1.0, 0.5), std::invalid_argument);
}

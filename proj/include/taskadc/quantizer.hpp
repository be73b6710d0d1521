// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "taskadc/random.hpp"

namespace taskadc {

struct QuantizerSpec {
  int bits = 1;
  double gamma = 1.0;  // one-sided dynamic range
  double delta = 1.0;  // step, always 2 gamma / 2^b
  bool dithered = true;

  static QuantizerSpec make(int bits, double gamma, bool dithered);
  bool degenerate() const { return gamma == 0.0; }
  int levels() const;
};

// Mid-rise uniform quantizer; |x| >= gamma saturates to sign(x) (gamma - delta/2).
double quantize_midrise(double x, const QuantizerSpec& spec);

// Triangular dither on [-delta, delta] as the sum of two uniforms on [-delta/2, delta/2].
double sample_dither(double delta, CounterRng& rng);

// Loading factor including the dither variance: eta^2 / (1 - 2 eta^2 / (3 * 4^b)).
double kappa_bar(double eta, int bits);

// gamma = sqrt(kappa_bar * max_input_variance)
double calibrate_dynamic_range(double max_input_variance, double eta, int bits);

// Chebyshev bound on Pr(|input| >= gamma).
double overload_probability_bound(double eta);

// Default loading schedule eta(b) = 0.25 b + 1.75.
double eta_schedule(int bits);

}  // namespace taskadc

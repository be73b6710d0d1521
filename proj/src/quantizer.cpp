// SPDX-License-Identifier: Apache-2.0
#include "taskadc/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace taskadc {

QuantizerSpec QuantizerSpec::make(int bits, double gamma, bool dithered) {
  if (bits < 1 || bits > 30) throw std::invalid_argument("quantizer: bits must be in [1, 30]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("quantizer: dynamic range must be finite and >= 0");
  }
  QuantizerSpec q;
  q.bits = bits;
  q.gamma = gamma;
  q.delta = 2.0 * gamma / std::ldexp(1.0, bits);
  q.dithered = dithered;
  return q;
}

int QuantizerSpec::levels() const { return 1 << bits; }

double quantize_midrise(double x, const QuantizerSpec& spec) {
  if (!std::isfinite(x)) throw std::invalid_argument("quantize_midrise: non-finite input");
  if (std::abs(x) < spec.gamma) {
    const double half = std::ldexp(1.0, spec.bits - 1);
    // guard against x / delta rounding up to the saturation level
    const double m = std::clamp(std::floor(x / spec.delta), -half, half - 1.0);
    return spec.delta * (m + 0.5);
  }
  return std::copysign(spec.gamma - 0.5 * spec.delta, x);
}

double sample_dither(double delta, CounterRng& rng) {
  if (!(delta > 0.0)) throw std::invalid_argument("sample_dither: step must be > 0");
  const double a = rng.uniform(-0.5 * delta, 0.5 * delta);
  const double b = rng.uniform(-0.5 * delta, 0.5 * delta);
  return a + b;
}

double kappa_bar(double eta, int bits) {
  if (!(eta > 0.0)) throw std::invalid_argument("kappa_bar: eta must be > 0");
  if (bits < 1) throw std::invalid_argument("kappa_bar: bits must be >= 1");
  const double denom = 1.0 - 2.0 * eta * eta / (3.0 * std::ldexp(1.0, 2 * bits));
  if (!(denom > 0.0)) {
    throw std::invalid_argument("kappa_bar: loading factor too large for the resolution");
  }
  return eta * eta / denom;
}

double calibrate_dynamic_range(double max_input_variance, double eta, int bits) {
  if (!(max_input_variance >= 0.0)) {
    throw std::invalid_argument("calibrate_dynamic_range: variance must be >= 0");
  }
  return std::sqrt(kappa_bar(eta, bits) * max_input_variance);
}

double overload_probability_bound(double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("overload_probability_bound: eta must be > 0");
  return std::min(1.0, 1.0 / (eta * eta));
}

double eta_schedule(int bits) { return 0.25 * bits + 1.75; }

}  // namespace taskadc

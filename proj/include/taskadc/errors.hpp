// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace taskadc {

// Precondition and configuration violations are reported as std::invalid_argument.
// Numerical breakdowns (failed decompositions, non-convergence) use this type.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace taskadc

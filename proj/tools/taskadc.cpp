// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "taskadc/cli.hpp"

int main(int argc, char** argv) { return taskadc::cli::run(argc, argv, std::cout, std::cerr); }

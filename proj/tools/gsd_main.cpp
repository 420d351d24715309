// SPDX-License-Identifier: Apache-2.0
#include "gsd/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return gsd::cli::run_cli(argc, argv, std::cout, std::cerr); }

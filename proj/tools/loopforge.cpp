// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "loopforge/cli.hpp"

int main(int argc, char** argv) { return loopforge::run_cli(argc, argv, std::cout, std::cerr); }

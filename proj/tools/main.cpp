// Copyright (c) 2026 switchkit contributors
// SPDX-License-Identifier: Apache-2.0

#include "switchkit/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char ** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return switchkit::run_cli(args, std::cout, std::cerr);
}

// SPDX-License-Identifier: Apache-2.0
#include <mtc/cli.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return mtc::cli::run_cli(args, std::cout, std::cerr);
}

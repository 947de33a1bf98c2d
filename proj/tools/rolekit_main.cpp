#include <iostream>

#include "rolekit/cli/cli.hpp"

int main(int argc, char** argv) {
    return rolekit::cli::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}

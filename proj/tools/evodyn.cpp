#include <iostream>

#include "evodyn/cli.hpp"

int main(int argc, char** argv) {
    return evodyn::cli::run_cli(argc, argv, std::cout, std::cerr);
}

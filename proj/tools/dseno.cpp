#include <iostream>

#include "dseno/cli/cli.hpp"

int main(int argc, char** argv) {
    return dseno::cli::run_cli(argc, argv, std::cout, std::cerr);
}

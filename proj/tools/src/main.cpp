#include <iostream>
#include <string>
#include <vector>

#include "cellmetry_cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cellmetry::cli::run(args, std::cout, std::cerr);
}

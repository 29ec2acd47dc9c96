#include <iostream>

#include "dcsim/cli.hpp"

int main(int argc, char** argv) {
    return dcsim::run_cli(argc, argv, std::cout, std::cerr);
}

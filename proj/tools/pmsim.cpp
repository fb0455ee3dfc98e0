#include <iostream>

#include "pmsim/cli.hpp"

int main(int argc, char** argv) { return pmsim::cli_run(argc, argv, std::cout, std::cerr); }

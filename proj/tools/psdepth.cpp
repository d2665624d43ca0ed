#include "psdepth/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return psdepth::cli::run_cli(argc, argv, std::cout, std::cerr); }

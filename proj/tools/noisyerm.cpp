#include "noisyerm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return noisyerm::run_cli(argc, argv, std::cout, std::cerr); }

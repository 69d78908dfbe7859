#include <iostream>

#include "tetrad/cli.hpp"

int main(int argc, char** argv) { return tetrad::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "degas/cli.hpp"

int main(int argc, char** argv) { return degas::run_cli(argc, argv, std::cout, std::cerr); }

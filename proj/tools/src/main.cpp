#include <iostream>

#include "factorsde/cli.hpp"

int main(int argc, char** argv) { return factorsde::cli::run(argc, argv, std::cout, std::cerr); }

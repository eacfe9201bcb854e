#include <iostream>

#include "rmc/cli.hpp"

int main(int argc, char** argv) { return rmc::cli::run(argc, argv, std::cout, std::cerr); }

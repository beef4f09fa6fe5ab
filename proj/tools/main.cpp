#include <iostream>

#include "eivbeta/cli.hpp"

int main(int argc, char** argv) { return eivbeta::cli::run_cli(argc, argv, std::cout, std::cerr); }

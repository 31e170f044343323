#include <iostream>

#include "recown/cli.hpp"

int main(int argc, char** argv) { return recown::cli::run(argc, argv, std::cout, std::cerr); }

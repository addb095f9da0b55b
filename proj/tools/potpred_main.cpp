#include <iostream>

#include "potpred/cli.hpp"

int main(int argc, char** argv) { return potpred::cli::run(argc, argv, std::cout, std::cerr); }

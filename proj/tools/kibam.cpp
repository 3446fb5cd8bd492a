#include <iostream>

#include "kibam/cli.hpp"

int main(int argc, char** argv) { return kibam::cli::run(argc, argv, std::cout, std::cerr); }

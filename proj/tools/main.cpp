#include <iostream>

#include "tsbench/cli.hpp"

int main(int argc, char** argv) { return tsbench::cli::run(argc, argv, std::cerr); }

#include <iostream>

#include "scglue/cli.hpp"

int main(int argc, char** argv) { return scglue::run_cli(argc, argv, std::cout, std::cerr); }

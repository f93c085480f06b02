#include <iostream>

#include "hetgp/cli.hpp"

int main(int argc, char** argv) { return hetgp::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "tacla/cli.hpp"

int main(int argc, char** argv) { return tacla::run_cli(argc, argv, std::cout, std::cerr); }

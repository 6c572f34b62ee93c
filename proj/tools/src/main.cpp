#include <iostream>

#include "mvs/cli/commands.hpp"

int main(int argc, char** argv) { return mvs::cli::run_cli(argc, argv, std::cout, std::cerr); }

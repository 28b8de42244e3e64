#include <iostream>

#include "hjb_cli/cli.hpp"

int main(int argc, char** argv) { return hjb::cli::run_cli(argc, argv, std::cout, std::cerr); }

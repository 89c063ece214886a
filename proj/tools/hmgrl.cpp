#include <iostream>

#include "hmgrl/cli/commands.hpp"

int main(int argc, char** argv) { return hmgrl::cli::run(argc, argv, std::cout, std::cerr); }

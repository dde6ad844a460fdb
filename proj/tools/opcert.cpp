#include <iostream>

#include "opcert/cli/commands.hpp"

int main(int argc, char** argv) { return opcert::cli::run(argc, argv, std::cout, std::cerr); }

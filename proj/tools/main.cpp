#include "exsimex/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return exsimex::run_cli(argc, argv, std::cout, std::cerr); }

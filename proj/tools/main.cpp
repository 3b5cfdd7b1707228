#include <iostream>

#include "invpricing/cli.hpp"

int main(int argc, char** argv) { return invpricing::run_cli(argc, argv, std::cout, std::cerr); }

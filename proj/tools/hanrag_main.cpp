#include <iostream>

#include "hanrag/cli.hpp"

int main(int argc, char** argv) { return hanrag::run_command(argc, argv, std::cout, std::cerr); }

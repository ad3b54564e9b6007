#include <iostream>

#include "vtree/commands.hpp"

int main(int argc, char** argv) { return vtree::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "ppgscreen/cli.hpp"

int main(int argc, char** argv) { return ppgscreen::run_cli(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "zilm/cli.hpp"

int main(int argc, char** argv) { return zilm::run_cli(argc, argv, std::cout, std::cerr); }

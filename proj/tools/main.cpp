#include "rbfpdm/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return rbfpdm::cli::run(argc, argv, std::cout, std::cerr); }

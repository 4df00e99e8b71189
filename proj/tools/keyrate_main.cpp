#include <iostream>

#include "keyrate/cli.hpp"

int main(int argc, char** argv) { return keyrate::cli::run(argc, argv, std::cout, std::cerr); }

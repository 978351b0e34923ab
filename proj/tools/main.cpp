#include <iostream>

#include "cli.hpp"

int main(int argc, char **argv) { return word2rate::cli::run(argc, argv, std::cout, std::cerr); }

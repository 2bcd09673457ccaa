#include <iostream>

#include "mhmm/cli.hpp"

int main(int argc, char** argv) { return mhmm::cli::run(argc, argv, std::cout, std::cerr); }

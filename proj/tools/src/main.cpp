#include <iostream>

#include "batchrl/commands.hpp"

int main(int argc, char** argv) { return batchrl::cli::run(argc, argv, std::cout, std::cerr); }

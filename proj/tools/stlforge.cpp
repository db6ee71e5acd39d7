#include <iostream>

#include "stlforge/commands.hpp"

int main(int argc, char** argv) { return stlforge::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "groupcdl/cli.hpp"

int main(int argc, char** argv) { return groupcdl::cli::run(argc, argv, std::cout, std::cerr); }

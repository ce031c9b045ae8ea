#include "relunet/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return relunet::run_cli(argc, argv, std::cout, std::cerr); }

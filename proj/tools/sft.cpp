#include <sft/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return sft::cli::run(argc, argv, std::cout, std::cerr); }

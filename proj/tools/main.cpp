#include <iostream>

#include "mubsep/cli.hpp"

int main(int argc, char** argv) { return mubsep::run_cli(argc, argv, std::cout, std::cerr); }

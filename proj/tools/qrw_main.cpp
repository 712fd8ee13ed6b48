#include <iostream>

#include "qrw/cli.hpp"

int main(int argc, char** argv) { return qrw::run_cli(argc, argv, std::cout, std::cerr); }

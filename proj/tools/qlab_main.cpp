#include <iostream>

#include "qlab/cli.hpp"

int main(int argc, char** argv) {
  return qlab::cli_run(argc, argv, std::cout, std::cerr);
}

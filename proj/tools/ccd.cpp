#include <iostream>
#include <string>
#include <vector>

#include "ccd/cli/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ccd::cli::run(args, std::cout, std::cerr);
}

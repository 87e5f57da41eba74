#include <iostream>
#include <string>
#include <vector>

#include "hyperloss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hyperloss::cli::dispatch(args, std::cout, std::cerr);
}

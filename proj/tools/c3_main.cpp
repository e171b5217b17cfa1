#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "c3/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
  return c3::run_cli(args, std::cout, std::cerr);
}

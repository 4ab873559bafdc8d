#include <iostream>
#include <string>
#include <vector>

#include "ganlm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ganlm::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "foldaug_cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return foldaug::cli::run(args, std::cout, std::cerr);
}

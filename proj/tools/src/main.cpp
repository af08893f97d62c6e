#include <iostream>
#include <string>
#include <vector>

#include "commands.hpp"

int main(int argc, char** argv) {
  prefrobust::cli::configure_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return prefrobust::cli::run(args, std::cout, std::cerr);
}

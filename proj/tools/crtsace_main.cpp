#include <iostream>

#include "crtsace/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return crtsace::run_cli(args, std::cout, std::cerr);
}

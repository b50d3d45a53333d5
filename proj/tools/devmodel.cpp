#include <iostream>

#include "devmodel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return devmodel::cli::cli_dispatch(args, std::cout, std::cerr);
}

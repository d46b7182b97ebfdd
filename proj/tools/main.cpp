#include <iostream>

#include "hpot/tools/cli.hpp"

int main(int argc, char** argv) {
  return hpot::tools::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

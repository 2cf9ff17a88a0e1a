#include <iostream>
#include <string>
#include <vector>

#include "fruitloc/cli.hpp"

int main(int argc, char** argv) {
  return fruitloc::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

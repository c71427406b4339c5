#include <iostream>
#include <string>
#include <vector>

#include "relstab/harness.hpp"

int main(int argc, char** argv) {
  return relstab::run_cli(std::vector<std::string>(argv, argv + argc), std::cout,
                          std::cerr);
}

// Apache License, Version 2.0, refer to LICENSE.txt

#include <iostream>
#include <string>
#include <vector>

#include "bncrowd/cli.hpp"

int main(int argc, char** argv) {
  return bncrowd::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

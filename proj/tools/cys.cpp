#include <iostream>

#include "cyscolor/cli.hpp"

int main(int argc, char** argv) {
  return cys::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}

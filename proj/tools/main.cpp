#include "glmmgm/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return glmmgm::run_command_line(argc, argv, std::cout, std::cerr);
}

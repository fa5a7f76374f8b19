#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  kappa::cli::configure_logging();
  return kappa::cli::run(argc, argv, std::cout, std::cerr);
}

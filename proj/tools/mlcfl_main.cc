#include <iostream>

#include "mlcfl/cli.h"

int main(int argc, char** argv) {
  return mlcfl::cli::run(argc, argv, std::cout, std::cerr);
}

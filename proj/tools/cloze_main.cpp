#include <iostream>

#include "cloze/cli.hpp"

int main(int argc, char** argv) {
  return cloze::cli::run(argc, argv, std::cout, std::cerr);
}

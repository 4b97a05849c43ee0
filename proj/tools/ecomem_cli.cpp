#include <string>
#include <vector>

#include "ecomem/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ecomem::cli::run(args);
}

#include <string>
#include <vector>

#include "mgnet/cli.hpp"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mgnet::cli::run(args);
}

#include <string>
#include <vector>

#include "tbsa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tbsa::run_cli(std::move(args));
}

#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include "cares/cli.hpp"

namespace {

extern "C" void on_interrupt(int) { cares::cli_stop_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  std::vector<std::string> args(argv + 1, argv + argc);
  return cares::run_cli(args, std::cout, std::cerr);
}

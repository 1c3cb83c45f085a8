#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace cares {

/// Set from a signal handler to drain a run: no new tasks start and the
/// partial detection stream is flushed with an incomplete marker.
std::atomic<bool>& cli_stop_flag();

/// Entry point shared by the `cares` binary and tests. args excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cares

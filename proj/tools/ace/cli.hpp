#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ace::cli {

inline constexpr const char* kToolVersion = "0.3.0";

/// Runs the `ace` command line. Returns the process exit status:
/// 0 ok, 2 usage/config, 3 ingest/schema, 4 numerics, 5 external service.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ace::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vesper {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Default run configuration as a JSON document (the published schema).
std::string default_config_json();

/// Entry point of the `vesper` executable. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vesper

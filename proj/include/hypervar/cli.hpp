// Configuration-driven experiment runner behind the hypervar command line.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypervar::cli {

/// Invalid or incomplete configuration; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  std::string subcommand;
  /// Empty only for `geom`, which needs no configuration.
  std::string config_path;
  /// Overrides the config's "output" entry when set.
  std::optional<std::string> out_dir;
  int threads = 1;
  /// Overrides the config's "seed" entry when set.
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand. Returns 0 on success, 1 on configuration errors and 2
/// on numeric failures (an error.json is written to the output directory).
int run(const RunOptions& opts, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace hypervar::cli

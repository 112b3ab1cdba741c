#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsoc/grid.hpp"

namespace nsoc {

enum class ExitCode : int {
  ok = 0,
  failure = 1,
  config = 2,
  io = 3,
  nonconvergence = 4,
  verification = 5,
};

/// Parameters of one batch run. Field-valued entries are source strings:
///   "<number>" or "constant:<number>", "sine" (nodal sin(πx)[sin(πy)]),
///   "instance:sine|plateau" (manufactured control, or exact state when used as a target),
///   "file:<path>" (field dump).
struct ExperimentConfig {
  std::string command = "solve";  ///< solve | differentiate | optimize | verify | study
  std::string study;              ///< frechet | deadzone | convergence (study only)
  int dim = 1;
  int n = 64;
  double alpha = 0.5;
  double nu = 1e-2;
  double tol = 1e-10;
  long max_iter = 500;
  std::uint64_t seed = 20240611;
  std::string method = "accel_prox";
  double eps_dead = -1.0;  ///< negative: relative default
  std::string control = "constant:0";
  std::string target = "sine";
  std::string direction = "constant:1";
  /// u = 0 gives y = 0 and S'(0) = 0, a stationary point of every tracking problem.
  std::string u0 = "constant:1";
  std::string lower = "-inf";
  std::string upper = "inf";
  std::vector<double> taus{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<int> ns{64, 128, 256};
  int samples = 200;
  std::string zone = "auto";  ///< auto | exact
  bool quick = false;
};

/// Sets one key from its text value; throws ConfigError on unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Flat "key = value" lines; '#' starts a comment; blank lines are ignored.
[[nodiscard]] ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Throws ConfigError when a value violates a module precondition.
void validate_config(const ExperimentConfig& cfg);

/// Builds a nodal field from a source string (see ExperimentConfig).
[[nodiscard]] Field field_from_source(const std::string& source, const Grid& grid, double alpha, bool as_target);

/// Ordered `key: value` lines.
class Report {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, long value);
  void add(const std::string& key, bool pass);
  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& lines() const noexcept { return lines_; }
  [[nodiscard]] std::optional<std::string> find(const std::string& key) const;
  void write(std::ostream& out) const;

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

struct RunResult {
  ExitCode code = ExitCode::ok;
  Report report;
  /// Diagnostic line for a nonzero exit.
  std::string message;
};

/// Validates, dispatches, and writes report.txt plus command-specific dumps into out_dir.
/// Never throws; failures map to the exit codes above.
[[nodiscard]] RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace nsoc

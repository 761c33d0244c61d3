#pragma once

// Scenario registry, strict configuration handling and run records for the
// command-line driver.
//
// A config is a JSON object: "scenario", "seed", an optional "output" object
// {"dir", "format"} and flat scenario parameters. Every key must be known for
// the chosen scenario, with a value of the default's type.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tsvsim {

inline constexpr int kRunSchemaVersion = 1;

struct ScenarioInfo {
  std::string name;
  std::string topic;
  std::string description;
};

/// Registry in stable order.
const std::vector<ScenarioInfo>& scenario_catalog();

/// Parameter defaults of a scenario (without scenario/seed/output); ConfigError if unknown.
nlohmann::json scenario_defaults(const std::string& scenario);

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
};

/// Reads a JSON config file; ConfigError on I/O or syntax errors.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Merges defaults < file < overrides into a fully resolved config. Unknown
/// keys, wrong value types and bad formats raise ConfigError naming the key.
/// `default_out_dir` is used when neither the file nor the overrides set one.
nlohmann::json resolve_config(const nlohmann::json& file, const ConfigOverrides& overrides = {},
                              const std::string& default_out_dir = ".");

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;

  /// Numbers in shortest round-trip form, strings verbatim, null as an empty cell.
  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

struct ScenarioResult {
  nlohmann::json summary;
  std::vector<Table> tables;  // the first one is the scenario's main table
};

/// Runs a resolved config. Results do not depend on `workers`.
ScenarioResult run_scenario(const nlohmann::json& config, unsigned workers = 1);

/// Runs, writes <dir>/<scenario>.json plus CSV tables (format "csv") or
/// tables embedded in the record (format "json"), and returns the record.
nlohmann::json run(const nlohmann::json& config, unsigned workers = 1);

/// Exit status for an exception escaping a run: 2 config, 3 incompatible
/// boundary, 4 numerical contract, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace tsvsim

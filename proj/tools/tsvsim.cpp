// tsvsim: run scenarios from JSON configs, list them, print the version.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsvsim/scenarios.hpp"

namespace {

int run_command(const std::string& config_path, const tsvsim::ConfigOverrides& overrides, unsigned workers) {
  const char* env = std::getenv("TSVSIM_OUT_DIR");
  const auto config = tsvsim::resolve_config(tsvsim::read_config_file(config_path), overrides, env && *env ? env : ".");
  const auto record = tsvsim::run(config, workers);
  const std::string dir = config["output"]["dir"];
  std::cout << dir << '/' << config["scenario"].get<std::string>() << ".json\n";
  if (record.contains("files"))
    for (const auto& f : record["files"]) std::cout << dir << '/' << f.get<std::string>() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-state-vector and branching simulations"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir, format;
  unsigned workers = 1;
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Override the seed");
  run->add_option("--out", out_dir, "Output directory (default: config, then $TSVSIM_OUT_DIR, then .)");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--workers", workers, "Worker threads; results do not depend on it")->check(CLI::Range(1u, 256u));

  auto* list = app.add_subcommand("list", "List the scenarios");
  bool as_json = false;
  list->add_flag("--json", as_json, "Machine-readable output");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return run_command(config_path, {seed, out_dir, format}, workers);
    if (*list) {
      const auto& catalog = tsvsim::scenario_catalog();
      if (as_json) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& s : catalog) out.push_back({{"name", s.name}, {"topic", s.topic}, {"description", s.description}});
        std::cout << out.dump(2) << '\n';
      } else {
        for (const auto& s : catalog) std::cout << s.name << "  [" << s.topic << "]  " << s.description << '\n';
      }
      return 0;
    }
    std::cout << "tsvsim " << TSVSIM_VERSION << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "tsvsim: " << e.what() << '\n';
    return tsvsim::exit_code_for(e);
  }
}

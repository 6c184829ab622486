#include <exception>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace vidplan::cli;
  CLI::App app{"Storage configuration planner for video analytics"};
  app.require_subcommand(1);
  Options o;
  std::optional<double> ingest;
  std::optional<double> storage;
  std::optional<std::uint64_t> seed;

  const std::map<std::string, std::pair<std::string, int (*)(const Options&, std::ostream&)>> commands{
      {"gen-profiles", {"write synthetic profiles as CSV", cmd_gen_profiles}},
      {"derive", {"derive consumption and storage formats", cmd_derive}},
      {"erode", {"plan age-based erosion of a derived configuration", cmd_erode}},
      {"plan-hw", {"Pareto frontier of hardware setups", cmd_plan_hw}},
      {"plan-migrate", {"schedule migration between placement policies", cmd_plan_migrate}},
      {"simulate", {"run the runtime scheduler simulation", cmd_simulate}},
  };
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", o.config, "planner configuration (JSON, comments allowed)");
    sub->add_option("--profiles", o.profiles, "profile CSV; synthetic profiles from the config otherwise");
    sub->add_option("--strategy", o.strategy, "storage-format strategy")->check(CLI::IsMember({"heuristic", "distance"}));
    sub->add_option("--budget-ingest", ingest, "ingestion budget in cores");
    sub->add_option("--budget-storage", storage, "storage budget in GB (hardware budget for plan-hw)");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--out-dir", o.out_dir, "directory for outputs")->capture_default_str();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  o.budget_ingest = ingest;
  o.budget_storage = storage;
  o.seed = seed;
  try {
    for (const auto& [name, entry] : commands) {
      if (app.got_subcommand(name)) return entry.second(o, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

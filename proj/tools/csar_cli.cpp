// csar: run scenarios and batteries, and summarise results directories.
//
//   csar run <scenario-file> [--seed N] [--out DIR] [--override key=value]...
//   csar battery <fig3|fig5|fig6> [--seed FIRST] [--seeds COUNT] [--out DIR] [--override ...]
//   csar report <results-dir> [--out FILE]
//
// Exit codes: 0 ok, 1 config error, 2 runtime failure, 3 finished with failed seeds.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csar/csar.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kRuntime = 2, kFailedSeeds = 3 };

void print_rows(const std::vector<csar::ScenarioSummary>& sums) {
  std::cout << std::left << std::setw(24) << "scenario" << std::setw(8) << "ok" << std::setw(8)
            << "failed" << std::setw(9) << "reached" << std::setw(10) << "median" << "IQR\n";
  for (const auto& s : sums) {
    const auto v = s.censored_values();
    int reached = 0;
    for (const auto& r : s.seeds) reached += (r.ok && r.steps_to_threshold) ? 1 : 0;
    std::cout << std::setw(24) << s.scenario.name << std::setw(8)
              << (static_cast<int>(s.seeds.size()) - s.failed()) << std::setw(8) << s.failed()
              << std::setw(9) << reached;
    if (v.empty()) {
      std::cout << "-\n";
    } else {
      std::cout << std::setw(10) << csar::median(v) << '[' << csar::quantile(v, 0.25) << ", "
                << csar::quantile(v, 0.75) << "]\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-based sim-and-real DQN training for suction picking"};
  app.require_subcommand(1);

  std::string out_dir = "results";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int seed_count = 10;
  int workers = 0;

  auto* run = app.add_subcommand("run", "Run one scenario file");
  std::string scenario_file;
  run->add_option("scenario", scenario_file, "Scenario config file")->required();
  run->add_option("--seed", seed, "Run only this seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--override", overrides, "key=value applied over the file");
  run->add_option("--workers", workers, "Agent worker threads (0: from config)");

  auto* battery = app.add_subcommand("battery", "Run a built-in battery");
  std::string battery_name;
  battery->add_option("name", battery_name, "fig3, fig5 or fig6")->required();
  battery->add_option("--seed", seed, "First seed (default 0)");
  battery->add_option("--seeds", seed_count, "Number of seeds")->check(CLI::PositiveNumber);
  battery->add_option("--out", out_dir, "Output directory (default results/<name>)");
  battery->add_option("--override", overrides, "key=value applied to every scenario");
  battery->add_option("--workers", workers, "Agent worker threads (0: from config)");

  auto* report = app.add_subcommand("report", "Recompute summaries from a results directory");
  std::string results_dir;
  std::string report_out;
  report->add_option("results-dir", results_dir, "Directory written by run or battery")->required();
  report->add_option("--out", report_out, "Write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (workers < 0) {
    std::cerr << "error: --workers must be >= 0\n";
    return kConfig;
  }
  if (workers > 0) overrides.push_back("trainer.workers=" + std::to_string(workers));

  std::vector<csar::Scenario> scenarios;
  std::string name;
  std::filesystem::path out = out_dir;
  try {
    if (*run) {
      csar::Scenario s = csar::load_scenario(scenario_file, overrides);
      if (seed) s.seeds = {*seed};
      name = s.name;
      scenarios.push_back(std::move(s));
    } else if (*battery) {
      const auto def = csar::builtin_battery(battery_name);
      scenarios = csar::battery_scenarios(def, csar::seed_range(seed.value_or(0), seed_count),
                                          overrides);
      name = def.name;
      if (!battery->count("--out")) out = out / def.name;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }

  try {
    if (*report) {
      const auto rows = csar::build_report(results_dir);
      if (rows.empty()) {
        std::cerr << "config error: no seed CSVs under " << results_dir << '\n';
        return kConfig;
      }
      nlohmann::json j = nlohmann::json::array();
      bool consistent = true;
      std::cout << std::left << std::setw(24) << "scenario" << std::setw(7) << "seeds"
                << std::setw(9) << "reached" << std::setw(10) << "median" << "IQR\n";
      for (const auto& r : rows) {
        j.push_back(csar::to_json(r));
        consistent = consistent && r.rolling_mismatches == 0 && r.summary_mismatches == 0;
        std::cout << std::setw(24) << r.scenario << std::setw(7) << r.seeds.size() << std::setw(9)
                  << r.reached << std::setw(10) << csar::median(r.censored) << '['
                  << csar::quantile(r.censored, 0.25) << ", " << csar::quantile(r.censored, 0.75)
                  << "]\n";
      }
      if (!report_out.empty()) csar::write_json_file(report_out, {{"rows", j}});
      if (!consistent) {
        std::cerr << "error: CSV contents disagree with rolling_sr column or seed summaries\n";
        return kRuntime;
      }
      return kOk;
    }

    if (*run) {
      csar::PretrainCache cache;
      const auto sum = csar::run_scenario(scenarios.front(), out, cache, &std::cout);
      print_rows({sum});
      return sum.failed() > 0 ? kFailedSeeds : kOk;
    }

    const auto res = csar::run_battery(name, scenarios, out, &std::cout);
    print_rows(res.scenarios);
    if (!res.comparisons.empty()) std::cout << res.comparisons.dump(2) << '\n';
    return res.failed_seeds() > 0 ? kFailedSeeds : kOk;
  } catch (const csar::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

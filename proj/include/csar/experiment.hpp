#pragma once

// Scenario definitions, seeded runs, batteries, and their CSV/JSON outputs.
//
// Output layout under <out>/<scenario>/:
//   seed_<s>.csv             co-training metrics, all agents
//   seed_<s>_pretrain.csv    pretraining metrics (single sim agent)
//   seed_<s>.manifest.json   every resolved setting of the run
//   seed_<s>.summary.json    steps to threshold and pretrain outcome
//   summary.json             median / IQR over seeds
// and a battery adds <out>/battery_summary.json.

#include <array>
#include <chrono>
#include <charconv>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "csar/checkpoint.hpp"
#include "csar/config.hpp"
#include "csar/consensus_graph.hpp"
#include "csar/csar_trainer.hpp"
#include "csar/metrics.hpp"
#include "csar/rng.hpp"
#include "csar/suction_env.hpp"

namespace csar {

inline constexpr std::string_view kCsvHeader =
    "scenario,seed,agent,step,epsilon,reward,success,mu,loss,rolling_sr";
inline constexpr std::string_view kVersion = "0.1.0";

enum class Strategy { sim_and_real, sim_to_real };

inline std::string_view to_string(Strategy s) {
  return s == Strategy::sim_and_real ? "sim_and_real" : "sim_to_real";
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "sim_and_real") return Strategy::sim_and_real;
  if (name == "sim_to_real") return Strategy::sim_to_real;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

struct PretrainSettings {
  double alpha = 0.02;
  double epsilon_start = 0.1;
  double epsilon_end = 0.1;
  int anneal_steps = 300;
  int max_steps = 3000;
};

struct Scenario {
  std::string name = "scenario";
  Strategy strategy = Strategy::sim_and_real;
  int num_sim_agents = 3;
  double pretrain_grade = 0.5;  // rolling success fraction that ends pretraining
  std::vector<std::uint64_t> seeds{0};
  double threshold = 80.0;  // percent, for steps_to_threshold
  TrainerConfig trainer;    // agents and seed are filled per run
  PretrainSettings pretrain;
  FidelityProfile sim = FidelityProfile::sim();
  FidelityProfile real = FidelityProfile::pseudo_real();

  // Agent 0 is the pseudo-real robot; simulated agents follow.
  std::vector<FidelityProfile> agent_profiles() const {
    std::vector<FidelityProfile> out{real};
    if (strategy == Strategy::sim_and_real)
      for (int k = 0; k < num_sim_agents; ++k) out.push_back(sim);
    return out;
  }

  int num_agents() const { return static_cast<int>(agent_profiles().size()); }

  void validate() const {
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
      throw ConfigError("scenario name must be non-empty and contain no path separators");
    if (strategy == Strategy::sim_and_real && num_sim_agents < 1)
      throw ConfigError("sim_and_real needs at least one simulated agent");
    if (strategy == Strategy::sim_to_real && num_sim_agents != 0)
      throw ConfigError("sim_to_real runs a single pseudo-real agent; set num_sim_agents = 0");
    if (!(pretrain_grade > 0.0 && pretrain_grade <= 1.0))
      throw ConfigError("pretrain_grade must be in (0, 1]");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (!(threshold >= 0.0 && threshold <= 100.0))
      throw ConfigError("threshold must be a percentage in [0, 100]");
    if (sim.kind != FidelityKind::sim || real.kind != FidelityKind::pseudo_real)
      throw ConfigError("profile kinds are fixed: [sim] is sim, [real] is pseudo_real");
    if (pretrain.anneal_steps < 1 || pretrain.max_steps < 1)
      throw ConfigError("pretrain step counts must be >= 1");
    if (!(pretrain.alpha >= 0.0) || !(pretrain.epsilon_start >= 0.0 && pretrain.epsilon_start <= 1.0) ||
        !(pretrain.epsilon_end >= 0.0 && pretrain.epsilon_end <= pretrain.epsilon_start))
      throw ConfigError("pretrain alpha/epsilon out of range");
    const int m = num_agents();
    for (const Edge& e : trainer.topology.edges)
      if (e.a >= m || e.b >= m) throw ConfigError("topology edge refers to a missing agent");
    TrainerConfig probe = trainer;
    probe.agents = agent_profiles();
    probe.validate();
    const Topology topo = probe.topology.build(m);
    if (!topo.connected()) throw ConfigError("training topology must be connected");
    if (!laplacian(topo).stable_mixing())
      throw ConfigError("topology weights make I - L unstable (some degree >= 1)");
  }
};

// Defaults used by the built-in batteries. Step size and exploration are
// scaled for the 16x16 desk network; see README for the reasoning.
inline Scenario desk_scenario() {
  Scenario s;
  s.trainer.alpha = 0.02;
  s.trainer.env.num_objects = 5;
  s.real.distortion_strength = 0.1;
  return s;
}

// Reads a scenario from a parsed config, on top of `base`. Every key present
// must be recognised.
inline Scenario scenario_from_config(const Config& c, Scenario s = desk_scenario()) {
  try {
    s.name = c.get_string("name", s.name);
    s.strategy = parse_strategy(c.get_string("strategy", std::string(to_string(s.strategy))));
    if (s.strategy == Strategy::sim_to_real && !c.has("num_sim_agents")) s.num_sim_agents = 0;
    s.num_sim_agents = static_cast<int>(c.get_int("num_sim_agents", s.num_sim_agents));
    s.pretrain_grade = c.get_double("pretrain_grade", s.pretrain_grade);
    s.threshold = c.get_double("threshold", s.threshold);
    if (c.has("seeds")) {
      s.seeds.clear();
      for (auto v : c.get_int_array("seeds")) {
        if (v < 0) throw ConfigError("seeds must be non-negative");
        s.seeds.push_back(static_cast<std::uint64_t>(v));
      }
    }

    TrainerConfig& t = s.trainer;
    t.alpha = c.get_double("trainer.alpha", t.alpha);
    t.gamma = c.get_double("trainer.gamma", t.gamma);
    t.epsilon_start = c.get_double("trainer.epsilon_start", t.epsilon_start);
    t.epsilon_end = c.get_double("trainer.epsilon_end", t.epsilon_end);
    t.total_steps = static_cast<int>(c.get_int("trainer.total_steps", t.total_steps));
    t.batch_size = static_cast<int>(c.get_int("trainer.batch_size", t.batch_size));
    t.replay_capacity = static_cast<int>(c.get_int("trainer.replay_capacity", t.replay_capacity));
    t.target_refresh_period =
        static_cast<int>(c.get_int("trainer.target_refresh_period", t.target_refresh_period));
    t.success_window = static_cast<int>(c.get_int("trainer.success_window", t.success_window));
    t.workers = static_cast<int>(c.get_int("trainer.workers", t.workers));

    PretrainSettings& p = s.pretrain;
    p.alpha = c.get_double("pretrain.alpha", p.alpha);
    p.epsilon_start = c.get_double("pretrain.epsilon_start", p.epsilon_start);
    p.epsilon_end = c.get_double("pretrain.epsilon_end", p.epsilon_end);
    p.anneal_steps = static_cast<int>(c.get_int("pretrain.anneal_steps", p.anneal_steps));
    p.max_steps = static_cast<int>(c.get_int("pretrain.max_steps", p.max_steps));

    EnvConfig& e = t.env;
    e.geometry.cells = static_cast<int>(c.get_int("env.cells", e.geometry.cells));
    e.geometry.extent = c.get_double("env.extent", e.geometry.extent);
    e.num_objects = static_cast<int>(c.get_int("env.num_objects", e.num_objects));
    e.empty_threshold = static_cast<int>(c.get_int("env.empty_threshold", e.empty_threshold));
    e.background_intensity = c.get_double("env.background_intensity", e.background_intensity);
    e.min_intensity = c.get_double("env.min_intensity", e.min_intensity);
    e.max_intensity = c.get_double("env.max_intensity", e.max_intensity);
    t.layout.height = e.geometry.cells;
    t.layout.width = e.geometry.cells;

    e.bands.mu_th = c.get_double("rewards.mu_th", e.bands.mu_th);
    if (c.has("rewards.values")) {
      const auto r = c.get_double_array("rewards.values");
      if (r.size() != 4) throw ConfigError("rewards.values needs four entries");
      e.bands.r0 = r[0];
      e.bands.r1 = r[1];
      e.bands.r2 = r[2];
      e.bands.r3 = r[3];
    }

    for (auto* prof : {&s.sim, &s.real}) {
      const std::string tab = prof == &s.sim ? "sim." : "real.";
      prof->object_side = c.get_double(tab + "object_side", prof->object_side);
      prof->depth_noise_sigma = c.get_double(tab + "depth_noise_sigma", prof->depth_noise_sigma);
      prof->distortion_strength =
          c.get_double(tab + "distortion_strength", prof->distortion_strength);
      prof->pick_failure_prob = c.get_double(tab + "pick_failure_prob", prof->pick_failure_prob);
    }

    TopologySpec& topo = t.topology;
    topo.kind = parse_topology_kind(c.get_string("topology.kind", std::string(to_string(topo.kind))));
    topo.edge_weight = c.get_double("topology.edge_weight", topo.edge_weight);
    if (c.has("topology.edges")) {
      topo.edges.clear();
      for (const auto& row : c.get_nested_double_array("topology.edges")) {
        if (row.size() != 2 && row.size() != 3)
          throw ConfigError("topology.edges entries are [a, b] or [a, b, weight]");
        if (row[0] < 0 || row[1] < 0 || row[0] != static_cast<int>(row[0]) ||
            row[1] != static_cast<int>(row[1]))
          throw ConfigError("topology edge endpoints must be non-negative integers");
        topo.edges.push_back({static_cast<int>(row[0]), static_cast<int>(row[1]),
                              row.size() == 3 ? row[2] : 0.0});
      }
    }
    if (topo.kind == TopologyKind::custom && topo.edges.empty())
      throw ConfigError("custom topology needs topology.edges");
    if (topo.kind != TopologyKind::custom && !topo.edges.empty())
      throw ConfigError("topology.edges is only used with kind = \"custom\"");

    c.require_all_used();
  } catch (const ConfigParseError& e) {
    throw ConfigError(e.what());
  } catch (const GraphError& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(e.what());
  }
  s.validate();
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Config c = Config::parse(ss.str(), path.string());
  for (const auto& o : overrides) c.apply_override(o);
  return scenario_from_config(c);
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

// One CSV line per (step, agent) record.
inline void write_metrics_csv(std::ostream& os, const std::string& scenario, std::uint64_t seed,
                              const TrainLog& log) {
  os << kCsvHeader << '\n';
  for (const auto& r : log.records) {
    os << scenario << ',' << seed << ',' << r.agent << ',' << r.step << ','
       << format_double(r.epsilon) << ',' << format_double(r.reward) << ','
       << (r.success ? 1 : 0) << ',' << format_double(r.mu) << ',' << format_double(r.loss)
       << ',' << format_double(r.rolling_sr) << '\n';
  }
}

inline json to_json(const TrainerConfig& t) {
  return {{"alpha", t.alpha},
          {"gamma", t.gamma},
          {"epsilon_start", t.epsilon_start},
          {"epsilon_end", t.epsilon_end},
          {"total_steps", t.total_steps},
          {"batch_size", t.batch_size},
          {"replay_capacity", t.replay_capacity},
          {"target_refresh_period", t.target_refresh_period},
          {"success_window", t.success_window},
          {"workers", t.workers}};
}

inline json to_json(const EnvConfig& e) {
  return {{"cells", e.geometry.cells},
          {"extent", e.geometry.extent},
          {"cell_size", e.geometry.cell_size()},
          {"num_objects", e.num_objects},
          {"empty_threshold", e.empty_threshold},
          {"background_intensity", e.background_intensity},
          {"min_intensity", e.min_intensity},
          {"max_intensity", e.max_intensity},
          {"rewards", {{"mu_th", e.bands.mu_th},
                       {"values", {e.bands.r0, e.bands.r1, e.bands.r2, e.bands.r3}}}}};
}

inline json to_json(const PretrainSettings& p) {
  return {{"alpha", p.alpha},
          {"epsilon_start", p.epsilon_start},
          {"epsilon_end", p.epsilon_end},
          {"anneal_steps", p.anneal_steps},
          {"max_steps", p.max_steps}};
}

inline json to_json(const Topology& topo) {
  json edges = json::array();
  for (const Edge& e : topo.edges()) edges.push_back({e.a, e.b, e.weight});
  return {{"num_agents", topo.num_agents()}, {"edges", edges}};
}

inline json scenario_json(const Scenario& s) {
  json topo{{"kind", std::string(to_string(s.trainer.topology.kind))},
            {"edge_weight", s.trainer.topology.edge_weight}};
  return {{"name", s.name},
          {"strategy", std::string(to_string(s.strategy))},
          {"num_sim_agents", s.num_sim_agents},
          {"pretrain_grade", s.pretrain_grade},
          {"seeds", s.seeds},
          {"threshold", s.threshold},
          {"trainer", to_json(s.trainer)},
          {"pretrain", to_json(s.pretrain)},
          {"env", to_json(s.trainer.env)},
          {"sim", to_json(s.sim)},
          {"real", to_json(s.real)},
          {"topology", topo}};
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline TrainerConfig pretrain_config(const Scenario& s, std::uint64_t seed) {
  TrainerConfig c = s.trainer;
  c.seed = derive_seed(seed, 1);
  c.agents = {s.sim};
  c.topology = TopologySpec{};
  c.alpha = s.pretrain.alpha;
  c.epsilon_start = s.pretrain.epsilon_start;
  c.epsilon_end = s.pretrain.epsilon_end;
  c.total_steps = s.pretrain.anneal_steps;
  c.checkpoint_period = 0;
  return c;
}

inline TrainerConfig cotrain_config(const Scenario& s, std::uint64_t seed) {
  TrainerConfig c = s.trainer;
  c.seed = derive_seed(seed, 2);
  c.agents = s.agent_profiles();
  return c;
}

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int pretrain_steps = 0;
  double pretrain_success_rate = 0.0;
  std::optional<int> steps_to_threshold;  // pseudo-real agent
  std::vector<std::optional<int>> agent_steps;
  double final_rolling_sr = 0.0;
  int total_steps = 0;

  // Never-reached runs count as total_steps + 1 for medians and sign tests.
  double censored() const {
    return steps_to_threshold ? static_cast<double>(*steps_to_threshold)
                              : static_cast<double>(total_steps + 1);
  }
};

inline json to_json(const SeedResult& r) {
  auto opt = [](const std::optional<int>& v) { return v ? json(*v) : json(nullptr); };
  json agents = json::array();
  for (const auto& a : r.agent_steps) agents.push_back(opt(a));
  return {{"seed", r.seed},
          {"status", r.ok ? "ok" : "failed"},
          {"error", r.error},
          {"pretrain_steps", r.pretrain_steps},
          {"pretrain_success_rate", r.pretrain_success_rate},
          {"steps_to_threshold", opt(r.steps_to_threshold)},
          {"steps_to_threshold_censored", r.ok ? json(r.censored()) : json(nullptr)},
          {"agent_steps_to_threshold", agents},
          {"final_rolling_sr", r.final_rolling_sr},
          {"total_steps", r.total_steps}};
}

// Pretrained parameters shared between scenarios of a battery that use the
// same pretraining recipe and seed.
class PretrainCache {
 public:
  const PretrainResult& get(const Scenario& s, std::uint64_t seed) {
    const TrainerConfig pc = pretrain_config(s, seed);
    json key{{"seed", seed},
             {"grade", s.pretrain_grade},
             {"pretrain", to_json(s.pretrain)},
             {"trainer", to_json(pc)},
             {"env", to_json(pc.env)},
             {"sim", to_json(s.sim)}};
    key["trainer"].erase("workers");
    const std::string k = key.dump();
    auto it = cache_.find(k);
    if (it == cache_.end()) {
      // PretrainError propagates; failed seeds are not cached.
      PretrainResult r = pretrain_run(pc, s.pretrain_grade, s.pretrain.max_steps);
      it = cache_.emplace(k, std::move(r)).first;
    }
    return it->second;
  }

 private:
  std::map<std::string, PretrainResult> cache_;
};

inline std::filesystem::path seed_stem(const std::filesystem::path& dir, std::uint64_t seed) {
  return dir / ("seed_" + std::to_string(seed));
}

// Pretrains (or reuses a cached pretrain), co-trains, and writes the seed's
// files into `dir`. Pretraining that misses the grade yields a failed result;
// training errors propagate.
inline SeedResult run_seed(const Scenario& s, std::uint64_t seed, const std::filesystem::path& dir,
                           PretrainCache& cache) {
  std::filesystem::create_directories(dir);
  const auto stem = seed_stem(dir, seed);
  SeedResult res;
  res.seed = seed;
  res.total_steps = s.trainer.total_steps;

  const TrainerConfig pc = pretrain_config(s, seed);
  const TrainerConfig cc = cotrain_config(s, seed);
  const Topology topo = cc.topology.build(cc.num_agents());
  json manifest{{"tool", "csar"},
                {"version", std::string(kVersion)},
                {"created_utc", utc_timestamp()},
                {"scenario", scenario_json(s)},
                {"seed", seed},
                {"pretrain_seed", pc.seed},
                {"cotrain_seed", cc.seed},
                {"agents", json::array()},
                {"topology", to_json(topo)},
                {"laplacian", json::array()},
                {"layout", to_json(cc.layout)},
                {"csv_header", std::string(kCsvHeader)},
                {"conventions",
                 {{"replay_buffer", "shared by all agents"},
                  {"first_update_step", 3},
                  {"epsilon_index", "step - 1"},
                  {"episode_end", "workspace repositioned"},
                  {"censored_steps", "total_steps + 1"},
                  {"threshold_window", "full windows only"}}}};
  for (const auto& p : cc.agents) manifest["agents"].push_back(to_json(p));
  const LaplacianMatrix lap = laplacian(topo);
  for (int i = 0; i < lap.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < lap.size(); ++j) row.push_back(lap(i, j));
    manifest["laplacian"].push_back(row);
  }

  const PretrainResult* pre = nullptr;
  try {
    pre = &cache.get(s, seed);
  } catch (const PretrainError& e) {
    res.error = e.what();
    std::ofstream pcsv(stem.string() + "_pretrain.csv");
    write_metrics_csv(pcsv, s.name, seed, e.log);
  }

  if (pre) {
    res.pretrain_steps = pre->steps;
    res.pretrain_success_rate = pre->success_rate;
    {
      std::ofstream pcsv(stem.string() + "_pretrain.csv");
      write_metrics_csv(pcsv, s.name, seed, pre->log);
    }
    const TrainLog log = train(cc, pre->params);
    {
      std::ofstream csv(stem.string() + ".csv");
      if (!csv) throw std::runtime_error("cannot write " + stem.string() + ".csv");
      write_metrics_csv(csv, s.name, seed, log);
    }
    for (int m = 0; m < cc.num_agents(); ++m)
      res.agent_steps.push_back(steps_to_threshold(log, m, s.threshold));
    res.steps_to_threshold = res.agent_steps.front();
    for (auto it = log.records.rbegin(); it != log.records.rend(); ++it)
      if (it->agent == 0) {
        res.final_rolling_sr = it->rolling_sr;
        break;
      }
    res.ok = true;
  }

  manifest["pretrain_steps"] = res.pretrain_steps;
  write_json_file(stem.string() + ".manifest.json", manifest);
  write_json_file(stem.string() + ".summary.json", to_json(res));
  return res;
}

struct ScenarioSummary {
  Scenario scenario;
  std::vector<SeedResult> seeds;

  std::vector<double> censored_values() const {
    std::vector<double> v;
    for (const auto& r : seeds)
      if (r.ok) v.push_back(r.censored());
    return v;
  }
  int failed() const {
    int n = 0;
    for (const auto& r : seeds) n += r.ok ? 0 : 1;
    return n;
  }
};

inline json to_json(const ScenarioSummary& sum) {
  const auto v = sum.censored_values();
  int reached = 0;
  json per_seed = json::array();
  for (const auto& r : sum.seeds) {
    per_seed.push_back(to_json(r));
    if (r.ok && r.steps_to_threshold) ++reached;
  }
  json stats = nullptr;
  if (!v.empty())
    stats = {{"median", median(v)}, {"q25", quantile(v, 0.25)}, {"q75", quantile(v, 0.75)},
             {"iqr", quantile(v, 0.75) - quantile(v, 0.25)}};
  return {{"scenario", sum.scenario.name},
          {"strategy", std::string(to_string(sum.scenario.strategy))},
          {"num_sim_agents", sum.scenario.num_sim_agents},
          {"pretrain_grade", sum.scenario.pretrain_grade},
          {"threshold", sum.scenario.threshold},
          {"seeds_ok", static_cast<int>(sum.seeds.size()) - sum.failed()},
          {"seeds_failed", sum.failed()},
          {"seeds_reached", reached},
          {"steps_to_threshold", stats},
          {"per_seed", per_seed}};
}

inline ScenarioSummary run_scenario(const Scenario& s, const std::filesystem::path& out,
                                    PretrainCache& cache, std::ostream* progress = nullptr) {
  ScenarioSummary sum{s, {}};
  const auto dir = out / s.name;
  for (std::uint64_t seed : s.seeds) {
    sum.seeds.push_back(run_seed(s, seed, dir, cache));
    if (progress) {
      const auto& r = sum.seeds.back();
      *progress << s.name << " seed " << seed << ": ";
      if (!r.ok) *progress << "failed (" << r.error << ")\n";
      else if (r.steps_to_threshold) *progress << "steps_to_" << s.threshold << " = " << *r.steps_to_threshold << '\n';
      else *progress << "threshold not reached\n";
    }
  }
  write_json_file(dir / "summary.json", to_json(sum));
  return sum;
}

// ---- batteries ----

struct BatteryDef {
  std::string name;
  std::vector<std::string> scenarios;  // config texts applied over desk_scenario()
};

inline std::vector<std::string> battery_names() { return {"fig3", "fig5", "fig6"}; }

inline BatteryDef builtin_battery(const std::string& name) {
  if (name == "fig3")
    return {name,
            {"name = \"fig3_sim_and_real\"\nstrategy = \"sim_and_real\"\nnum_sim_agents = 3\n",
             "name = \"fig3_sim_to_real\"\nstrategy = \"sim_to_real\"\nnum_sim_agents = 0\n"}};
  if (name == "fig5") {
    BatteryDef b{name, {}};
    for (const char* g : {"0.3", "0.5", "0.7", "0.9"})
      b.scenarios.push_back(std::string("name = \"fig5_grade_") + g +
                            "\"\nstrategy = \"sim_and_real\"\nnum_sim_agents = 3\npretrain_grade = " +
                            g + "\n");
    return b;
  }
  if (name == "fig6") {
    BatteryDef b{name, {}};
    for (int k = 1; k <= 3; ++k)
      b.scenarios.push_back("name = \"fig6_sim" + std::to_string(k) +
                            "\"\nstrategy = \"sim_and_real\"\nnum_sim_agents = " +
                            std::to_string(k) + "\n");
    return b;
  }
  throw ConfigError("unknown battery '" + name + "' (known: fig3, fig5, fig6)");
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  std::vector<std::uint64_t> v;
  for (int i = 0; i < count; ++i) v.push_back(first + static_cast<std::uint64_t>(i));
  return v;
}

inline std::vector<Scenario> battery_scenarios(const BatteryDef& b,
                                               const std::vector<std::uint64_t>& seeds,
                                               const std::vector<std::string>& overrides) {
  std::vector<Scenario> out;
  for (const auto& text : b.scenarios) {
    Config c = Config::parse(text, "battery " + b.name);
    for (const auto& o : overrides) c.apply_override(o);
    Scenario s = scenario_from_config(c);
    if (!c.has("seeds")) s.seeds = seeds;
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<double> paired_values(const ScenarioSummary& s,
                                         const std::vector<std::uint64_t>& seeds) {
  std::vector<double> v;
  for (auto seed : seeds)
    for (const auto& r : s.seeds)
      if (r.seed == seed) v.push_back(r.censored());
  return v;
}

// Cross-scenario comparisons written into the battery summary.
inline json battery_comparisons(const std::string& name, const std::vector<ScenarioSummary>& sums) {
  json out = json::object();
  auto med = [](const ScenarioSummary& s) {
    const auto v = s.censored_values();
    return v.empty() ? json(nullptr) : json(median(v));
  };
  if (name == "fig3" && sums.size() == 2) {
    // Pairs: seeds where both strategies completed.
    std::vector<std::uint64_t> both;
    for (const auto& a : sums[0].seeds)
      for (const auto& b : sums[1].seeds)
        if (a.seed == b.seed && a.ok && b.ok) both.push_back(a.seed);
    const auto sar = paired_values(sums[0], both);
    const auto str = paired_values(sums[1], both);
    const SignTest t = sign_test_less(sar, str);
    out["pairs"] = both.size();
    out["sim_and_real_median"] = sar.empty() ? json(nullptr) : json(median(sar));
    out["sim_to_real_median"] = str.empty() ? json(nullptr) : json(median(str));
    out["sign_test"] = {{"wins", t.wins}, {"losses", t.losses}, {"ties", t.ties},
                        {"p_value", t.p_value}};
  } else if (name == "fig6" || name == "fig5") {
    json meds = json::array();
    for (const auto& s : sums) meds.push_back({{"scenario", s.scenario.name}, {"median", med(s)}});
    out["medians"] = meds;
  }
  return out;
}

struct BatteryResult {
  std::string name;
  std::vector<ScenarioSummary> scenarios;
  json comparisons;

  int failed_seeds() const {
    int n = 0;
    for (const auto& s : scenarios) n += s.failed();
    return n;
  }
};

inline BatteryResult run_battery(const std::string& name, const std::vector<Scenario>& scenarios,
                                 const std::filesystem::path& out, std::ostream* progress = nullptr) {
  BatteryResult res{name, {}, {}};
  PretrainCache cache;
  for (const auto& s : scenarios) res.scenarios.push_back(run_scenario(s, out, cache, progress));
  res.comparisons = battery_comparisons(name, res.scenarios);
  json rows = json::array();
  for (const auto& s : res.scenarios) {
    json row = to_json(s);
    row.erase("per_seed");
    rows.push_back(row);
  }
  write_json_file(out / "battery_summary.json", {{"battery", name},
                                                 {"version", std::string(kVersion)},
                                                 {"created_utc", utc_timestamp()},
                                                 {"rows", rows},
                                                 {"comparisons", res.comparisons}});
  return res;
}

// ---- report: recompute everything from the CSVs ----

struct CsvRun {
  std::string scenario;
  std::uint64_t seed = 0;
  std::map<int, std::vector<int>> steps;  // per agent
  std::map<int, std::vector<bool>> success;
  std::map<int, std::vector<double>> rolling;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvRun read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw std::runtime_error(path.string() + ": unexpected CSV header");
  CsvRun run;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 10 fields");
    run.scenario = f[0];
    run.seed = std::stoull(f[1]);
    const int agent = std::stoi(f[2]);
    run.steps[agent].push_back(std::stoi(f[3]));
    run.success[agent].push_back(f[6] == "1");
    run.rolling[agent].push_back(std::stod(f[9]));
  }
  return run;
}

struct ReportRow {
  std::string scenario;
  std::vector<std::uint64_t> seeds;
  std::vector<double> censored;
  int reached = 0;
  int rolling_mismatches = 0;
  int summary_mismatches = 0;
};

// Walks <dir> for seed_<s>.csv files (pretrain CSVs excluded), recomputes
// steps to threshold for agent 0 from the success column, checks the stored
// rolling_sr column and per-seed summaries, and returns rows per scenario.
inline std::vector<ReportRow> build_report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("results directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    const auto fn = e.path().filename().string();
    if (e.is_regular_file() && fn.rfind("seed_", 0) == 0 && e.path().extension() == ".csv" &&
        fn.find("_pretrain") == std::string::npos)
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, ReportRow> rows;
  for (const auto& f : files) {
    const auto stem = f.parent_path() / f.stem();
    const json manifest = read_json_file(stem.string() + ".manifest.json");
    const int window = manifest.at("scenario").at("trainer").at("success_window").get<int>();
    const int total = manifest.at("scenario").at("trainer").at("total_steps").get<int>();
    const double threshold = manifest.at("scenario").at("threshold").get<double>();
    const CsvRun run = read_metrics_csv(f);
    ReportRow& row = rows[run.scenario];
    row.scenario = run.scenario;
    row.seeds.push_back(run.seed);
    for (const auto& [agent, succ] : run.success)
      for (std::size_t i = 0; i < succ.size(); ++i)
        if (std::abs(rolling_fraction(succ, i, window) - run.rolling.at(agent)[i]) > 1e-12)
          ++row.rolling_mismatches;
    const auto st = steps_to_threshold(run.steps.at(0), run.success.at(0), window, threshold);
    row.censored.push_back(st ? *st : total + 1);
    if (st) ++row.reached;
    const auto summary_path = stem.string() + ".summary.json";
    if (std::filesystem::exists(summary_path)) {
      const json sj = read_json_file(summary_path);
      const json& v = sj.at("steps_to_threshold");
      if ((v.is_null() != !st) || (st && v.get<int>() != *st)) ++row.summary_mismatches;
    }
  }
  std::vector<ReportRow> out;
  for (auto& [k, v] : rows) out.push_back(std::move(v));
  return out;
}

inline json to_json(const ReportRow& r) {
  return {{"scenario", r.scenario},
          {"seeds", r.seeds},
          {"steps_to_threshold_censored", r.censored},
          {"median", r.censored.empty() ? json(nullptr) : json(median(r.censored))},
          {"q25", r.censored.empty() ? json(nullptr) : json(quantile(r.censored, 0.25))},
          {"q75", r.censored.empty() ? json(nullptr) : json(quantile(r.censored, 0.75))},
          {"reached", r.reached},
          {"rolling_sr_mismatches", r.rolling_mismatches},
          {"summary_mismatches", r.summary_mismatches}};
}

}  // namespace csar

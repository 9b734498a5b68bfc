#pragma once

// Lock-step consensus training of M agents. Each iteration every agent
// observes, evaluates its Q-map, computes the TD error of its previous pick,
// then all agents take one consensus-plus-gradient step, one replay step, and
// pick again.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "csar/checkpoint.hpp"
#include "csar/consensus_graph.hpp"
#include "csar/qfunction.hpp"
#include "csar/replay_buffer.hpp"
#include "csar/rng.hpp"
#include "csar/suction_env.hpp"

namespace csar {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TopologySpec {
  TopologyKind kind = TopologyKind::complete;
  double edge_weight = 0.0;  // <= 0 selects 1 / (d_max + 1)
  std::vector<Edge> edges;   // custom kind; a weight <= 0 takes the default

  Topology build(int num_agents) const {
    if (kind != TopologyKind::custom) {
      const double w = edge_weight > 0.0 ? edge_weight : default_edge_weight(kind, num_agents);
      return build_topology(kind, num_agents, w);
    }
    std::vector<Edge> structure = edges;
    for (Edge& e : structure) e.weight = 1.0;
    const double fallback = edge_weight > 0.0
                                ? edge_weight
                                : default_edge_weight(Topology(num_agents, structure));
    std::vector<Edge> weighted = edges;
    for (Edge& e : weighted)
      if (!(e.weight > 0.0)) e.weight = fallback;
    return build_topology(TopologyKind::custom, num_agents, fallback, weighted);
  }
};

struct TrainerConfig {
  double alpha = 1e-4;
  double gamma = 0.5;
  double epsilon_start = 0.5;
  double epsilon_end = 0.1;
  int total_steps = 270;
  int batch_size = 8;
  int replay_capacity = 500;
  int target_refresh_period = 10;
  int success_window = 20;
  EnvConfig env;  // profile is replaced per agent
  Layout layout = Layout::desk_default();
  TopologySpec topology;
  std::vector<FidelityProfile> agents{FidelityProfile::sim()};
  std::uint64_t seed = 0;
  int workers = 1;
  // All agents draw from stream 0 (identical environments and policies).
  bool identical_agent_streams = false;
  bool require_connected = true;
  int checkpoint_period = 0;  // 0 disables
  std::filesystem::path checkpoint_dir;

  int num_agents() const { return static_cast<int>(agents.size()); }

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 &&
          epsilon_end <= 1.0))
      throw ConfigError("epsilon values must be in [0, 1]");
    if (epsilon_end > epsilon_start) throw ConfigError("epsilon_end must not exceed epsilon_start");
    if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be >= 1");
    if (target_refresh_period < 1) throw ConfigError("target_refresh_period must be >= 1");
    if (success_window < 1) throw ConfigError("success_window must be >= 1");
    if (agents.empty()) throw ConfigError("at least one agent is required");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (checkpoint_period < 0) throw ConfigError("checkpoint_period must be >= 0");
    if (layout.height != env.geometry.cells || layout.width != env.geometry.cells)
      throw ConfigError("network layout does not match the workspace grid");
    try {
      layout.validate();
      for (const auto& p : agents) {
        EnvConfig e = env;
        e.profile = p;
        e.validate();
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

// Linear from epsilon_start at step 0 to epsilon_end at total_steps, clamped.
inline double epsilon_at(int step, const TrainerConfig& cfg) {
  const double frac =
      std::clamp(static_cast<double>(step) / static_cast<double>(cfg.total_steps), 0.0, 1.0);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

// consensus_step followed by each row's own gradient step.
inline ParameterStack csar_update(const ParameterStack& stack, const LaplacianMatrix& lap,
                                  const ParameterStack& tdgrads, double alpha) {
  if (tdgrads.rows() != stack.rows() || tdgrads.cols() != stack.cols())
    throw std::invalid_argument("csar_update: gradient stack shape differs from parameter stack");
  ParameterStack out = consensus_step(stack, lap);
  for (int m = 0; m < out.rows(); ++m) {
    auto row = out.row(m);
    const auto g = tdgrads.row(m);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] -= alpha * g[j];
  }
  return out;
}

// One averaged SGD step over min(batch_size, size) uniformly drawn
// transitions, with targets from `target`.
inline ParameterVector replay_update(const ParameterVector& params, const ParameterVector& target,
                                     const ReplayBuffer& buffer, const TrainerConfig& cfg,
                                     Rng& rng) {
  if (buffer.empty()) return params;
  const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), buffer.size());
  Gradient sum = Gradient::zeros(params.layout);
  for (std::size_t i = 0; i < count; ++i) {
    const Transition& tr = buffer[uniform_index(rng, buffer.size())];
    const double y = tr.done ? tr.reward
                             : td_target(tr.reward, forward(target, tr.next_state), cfg.gamma, false);
    const double xi = td_error(q_value(params, tr.state, tr.action), y);
    if (!std::isfinite(xi)) throw TrainingError("replay_update: non-finite TD error");
    const Gradient g = backward(params, tr.state, tr.action, xi);
    for (std::size_t j = 0; j < sum.values.size(); ++j) sum.values[j] += g.values[j];
  }
  const double scale = 1.0 / static_cast<double>(count);
  for (double& v : sum.values) v *= scale;
  return apply_sgd(params, sum, cfg.alpha);
}

struct StepRecord {
  int step = 0;
  int agent = 0;
  double epsilon = 0.0;
  double reward = 0.0;
  bool success = false;
  double mu = 0.0;
  double loss = 0.0;
  double xi = 0.0;
  bool updated = false;
  Action action;
  double rolling_sr = 0.0;
  bool window_full = false;
  std::size_t objects_before = 0;
  std::size_t objects_after = 0;
  bool repositioned = false;
};

struct TrainLog {
  int num_agents = 0;
  int window = 20;
  std::vector<StepRecord> records;  // step-major, agent-minor

  std::vector<StepRecord> for_agent(int agent) const {
    std::vector<StepRecord> out;
    for (const auto& r : records)
      if (r.agent == agent) out.push_back(r);
    return out;
  }
};

// Parameter stacks around one update, for offline checking.
struct UpdateTrace {
  int step = 0;
  ParameterStack before;
  ParameterStack tdgrads;
  ParameterStack after_consensus;
  ParameterStack after_replay;
};

// Runs fn(agent) for every agent on up to `workers` threads. Each agent index
// is handled by exactly one thread; the first exception (by agent index) is
// rethrown after all threads join.
template <typename Fn>
void for_each_agent(int num_agents, int workers, Fn&& fn) {
  const int threads = std::min(workers, num_agents);
  if (threads <= 1) {
    for (int m = 0; m < num_agents; ++m) fn(m);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(num_agents));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int m = t; m < num_agents; m += threads) {
          try {
            fn(m);
          } catch (...) {
            errors[static_cast<std::size_t>(m)] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

class CsarTrainer {
 public:
  using TraceFn = std::function<void(const UpdateTrace&)>;

  explicit CsarTrainer(TrainerConfig cfg, std::optional<ParameterVector> initial = std::nullopt)
      : cfg_(std::move(cfg)), buffer_(static_cast<std::size_t>(std::max(1, cfg_.replay_capacity))) {
    cfg_.validate();
    const int m_count = cfg_.num_agents();
    const Topology topo = cfg_.topology.build(m_count);
    if (cfg_.require_connected && !topo.connected())
      throw ConfigError("training topology must be connected");
    lap_ = laplacian(topo);
    if (!lap_.stable_mixing())
      throw ConfigError("topology weights make I - L unstable (some degree >= 1)");

    ParameterVector init = initial ? *initial : init_params(cfg_.layout, cfg_.seed);
    if (!(init.layout == cfg_.layout))
      throw ConfigError("initial parameters do not match the configured layout");

    for (int m = 0; m < m_count; ++m) {
      const auto stream = static_cast<std::uint32_t>(cfg_.identical_agent_streams ? 0 : m);
      EnvConfig env = cfg_.env;
      env.profile = cfg_.agents[static_cast<std::size_t>(m)];
      Agent a{init, init, SuctionEnv(env, make_rng(cfg_.seed, stream, StreamPurpose::environment)),
              make_rng(cfg_.seed, stream, StreamPurpose::policy), {}, std::nullopt, {}};
      a.state = a.env.observe();
      agents_.push_back(std::move(a));
    }
    log_.num_agents = m_count;
    log_.window = cfg_.success_window;
  }

  const TrainerConfig& config() const { return cfg_; }
  const LaplacianMatrix& laplacian_matrix() const { return lap_; }
  const TrainLog& log() const { return log_; }
  TrainLog take_log() { return std::move(log_); }
  int steps_done() const { return step_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  const ParameterVector& params(int agent) const {
    return agents_[static_cast<std::size_t>(agent)].params;
  }
  const ParameterVector& target_params(int agent) const {
    return agents_[static_cast<std::size_t>(agent)].target;
  }
  const WorkspaceState& workspace(int agent) const {
    return agents_[static_cast<std::size_t>(agent)].env.workspace();
  }
  const Heightmaps& current_state(int agent) const {
    return agents_[static_cast<std::size_t>(agent)].state;
  }

  ParameterStack stack() const {
    ParameterStack s(cfg_.num_agents(), cfg_.layout.num_params());
    for (int m = 0; m < cfg_.num_agents(); ++m) {
      const auto& w = agents_[static_cast<std::size_t>(m)].params.weights;
      std::copy(w.begin(), w.end(), s.row(m).begin());
    }
    return s;
  }

  void set_trace(TraceFn fn) { trace_ = std::move(fn); }

  double rolling_success(int agent) const {
    const auto& h = agents_[static_cast<std::size_t>(agent)].history;
    if (h.empty()) return 0.0;
    return static_cast<double>(std::count(h.begin(), h.end(), true)) /
           static_cast<double>(h.size());
  }
  bool window_full(int agent) const {
    return static_cast<int>(agents_[static_cast<std::size_t>(agent)].history.size()) >=
           cfg_.success_window;
  }

  // One iteration. Steps are numbered from 1; updates start at step 3.
  void step() {
    const int t = ++step_;
    const int m_count = cfg_.num_agents();
    const bool update = t > 2;
    const std::size_t n = cfg_.layout.num_params();

    // (1)-(4a) evaluate the Q-map and the TD gradient of the previous pick.
    std::vector<QMap> qmaps(static_cast<std::size_t>(m_count));
    ParameterStack tdgrads(m_count, n);
    std::vector<double> xis(static_cast<std::size_t>(m_count), 0.0);
    for_each_agent(m_count, cfg_.workers, [&](int m) {
      Agent& a = agents_[static_cast<std::size_t>(m)];
      qmaps[static_cast<std::size_t>(m)] = forward(a.params, a.state);
      if (!update || !a.pending) return;
      const Transition& tr = *a.pending;
      const double y = tr.done ? tr.reward
                               : td_target(tr.reward, forward(a.target, a.state), cfg_.gamma, false);
      const double xi = td_error(q_value(a.params, tr.state, tr.action), y);
      if (!std::isfinite(xi)) {
        std::ostringstream msg;
        msg << "non-finite TD error for agent " << m << " at step " << t;
        throw TrainingError(msg.str());
      }
      xis[static_cast<std::size_t>(m)] = xi;
      const Gradient g = backward(a.params, tr.state, tr.action, xi);
      std::copy(g.values.begin(), g.values.end(), tdgrads.row(m).begin());
    });

    // Finished transitions enter the shared buffer in agent order.
    for (Agent& a : agents_) {
      if (a.pending) {
        buffer_.push(std::move(*a.pending));
        a.pending.reset();
      }
    }

    if (update) {
      UpdateTrace trace;
      const ParameterStack before = stack();
      const ParameterStack mixed = csar_update(before, lap_, tdgrads, cfg_.alpha);
      for (int m = 0; m < m_count; ++m) {
        auto& w = agents_[static_cast<std::size_t>(m)].params.weights;
        const auto row = mixed.row(m);
        std::copy(row.begin(), row.end(), w.begin());
      }
      for_each_agent(m_count, cfg_.workers, [&](int m) {
        Agent& a = agents_[static_cast<std::size_t>(m)];
        a.params = replay_update(a.params, a.target, buffer_, cfg_, a.policy_rng);
      });
      for (const Agent& a : agents_)
        for (double v : a.params.weights)
          if (!std::isfinite(v)) throw TrainingError("non-finite parameter at step " + std::to_string(t));
      ++updates_;
      if (updates_ % cfg_.target_refresh_period == 0)
        for (Agent& a : agents_) a.target = a.params;
      if (trace_) {
        trace.step = t;
        trace.before = before;
        trace.tdgrads = tdgrads;
        trace.after_consensus = mixed;
        trace.after_replay = stack();
        trace_(trace);
      }
    }

    // (5)-(6) act in every environment and stage the new transitions.
    const double eps = epsilon_at(t - 1, cfg_);
    std::vector<StepRecord> records(static_cast<std::size_t>(m_count));
    for_each_agent(m_count, cfg_.workers, [&](int m) {
      Agent& a = agents_[static_cast<std::size_t>(m)];
      const Action action =
          select_action(qmaps[static_cast<std::size_t>(m)], a.state.depth, eps, a.policy_rng);
      StepOutcome out = a.env.step(action);
      a.history.push_back(out.success);
      while (static_cast<int>(a.history.size()) > cfg_.success_window) a.history.pop_front();

      StepRecord& rec = records[static_cast<std::size_t>(m)];
      rec.step = t;
      rec.agent = m;
      rec.epsilon = eps;
      rec.reward = out.reward;
      rec.success = out.success;
      rec.mu = out.mu;
      rec.updated = update;
      rec.xi = xis[static_cast<std::size_t>(m)];
      rec.loss = update ? huber_loss(rec.xi) : 0.0;
      rec.action = action;
      rec.rolling_sr = static_cast<double>(std::count(a.history.begin(), a.history.end(), true)) /
                       static_cast<double>(a.history.size());
      rec.window_full = static_cast<int>(a.history.size()) >= cfg_.success_window;
      rec.objects_before = out.objects_before;
      rec.objects_after = out.objects_after;
      rec.repositioned = out.repositioned;

      a.pending = Transition{std::move(a.state), action, out.reward, out.next_state,
                             out.repositioned, m};
      a.state = std::move(out.next_state);
    });
    log_.records.insert(log_.records.end(), records.begin(), records.end());

    if (cfg_.checkpoint_period > 0 && t % cfg_.checkpoint_period == 0) write_checkpoint();
  }

  void run(int steps) {
    for (int i = 0; i < steps; ++i) step();
  }

  TrainerCheckpoint checkpoint() const {
    TrainerCheckpoint ck;
    ck.step = step_;
    ck.layout = cfg_.layout;
    ck.params = stack();
    ck.targets = ParameterStack(cfg_.num_agents(), cfg_.layout.num_params());
    for (int m = 0; m < cfg_.num_agents(); ++m) {
      const Agent& a = agents_[static_cast<std::size_t>(m)];
      std::copy(a.target.weights.begin(), a.target.weights.end(), ck.targets.row(m).begin());
      ck.policy_rng.push_back(rng_state(a.policy_rng));
      ck.env_rng.push_back(rng_state(a.env.rng()));
    }
    return ck;
  }

 private:
  struct Agent {
    ParameterVector params;
    ParameterVector target;
    SuctionEnv env;
    Rng policy_rng;
    Heightmaps state;
    std::optional<Transition> pending;
    std::deque<bool> history;
  };

  void write_checkpoint() const {
    std::filesystem::create_directories(cfg_.checkpoint_dir);
    save_checkpoint(cfg_.checkpoint_dir / ("checkpoint_" + std::to_string(step_)), checkpoint());
  }

  TrainerConfig cfg_;
  ReplayBuffer buffer_;
  LaplacianMatrix lap_{1};
  std::vector<Agent> agents_;
  TrainLog log_;
  TraceFn trace_;
  int step_ = 0;
  int updates_ = 0;
};

inline TrainLog train(const TrainerConfig& cfg,
                      std::optional<ParameterVector> initial = std::nullopt) {
  CsarTrainer trainer(cfg, std::move(initial));
  trainer.run(cfg.total_steps);
  return trainer.take_log();
}

struct PretrainError : std::runtime_error {
  PretrainError(const std::string& what, TrainLog log)
      : std::runtime_error(what), log(std::move(log)) {}
  TrainLog log;
};

struct PretrainResult {
  ParameterVector params;
  int steps = 0;
  double success_rate = 0.0;
  TrainLog log;
};

// Trains one simulated agent until its rolling success rate over a full
// window first reaches `stop_success_rate`. The epsilon schedule anneals over
// cfg.total_steps and then holds at epsilon_end.
inline PretrainResult pretrain_run(TrainerConfig cfg, double stop_success_rate, int max_steps,
                                   std::optional<ParameterVector> initial = std::nullopt) {
  if (!(stop_success_rate > 0.0 && stop_success_rate <= 1.0))
    throw std::invalid_argument("pretrain: stop success rate must be in (0, 1]");
  if (max_steps < 1) throw std::invalid_argument("pretrain: max_steps must be >= 1");
  if (cfg.agents.size() != 1 || cfg.agents.front().kind != FidelityKind::sim)
    throw std::invalid_argument("pretrain: expects exactly one sim agent");
  CsarTrainer trainer(std::move(cfg), std::move(initial));
  for (int s = 0; s < max_steps; ++s) {
    trainer.step();
    if (trainer.window_full(0) && trainer.rolling_success(0) >= stop_success_rate)
      return {trainer.params(0), trainer.steps_done(), trainer.rolling_success(0),
              trainer.take_log()};
  }
  std::ostringstream msg;
  msg << "pretraining did not reach success rate " << stop_success_rate << " within "
      << max_steps << " steps";
  throw PretrainError(msg.str(), trainer.take_log());
}

inline ParameterVector pretrain(const TrainerConfig& cfg, double stop_success_rate,
                                int max_steps) {
  return pretrain_run(cfg, stop_success_rate, max_steps).params;
}

}  // namespace csar

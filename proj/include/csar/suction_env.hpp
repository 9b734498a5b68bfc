#pragma once

// Grid-world suction picking. Cubes lie flat and apart on a square workspace;
// a top-down orthographic projection gives colour and depth heightmaps. The
// `pseudo_real` profile stands in for the physical robot: larger cubes, depth
// noise, barrel distortion of the camera image, and random suction failures.

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csar/grid.hpp"
#include "csar/qfunction.hpp"
#include "csar/rng.hpp"

namespace csar {

struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class FidelityKind { sim, pseudo_real };

inline std::string_view to_string(FidelityKind kind) {
  return kind == FidelityKind::sim ? "sim" : "pseudo_real";
}

inline FidelityKind parse_fidelity_kind(std::string_view name) {
  if (name == "sim") return FidelityKind::sim;
  if (name == "pseudo_real") return FidelityKind::pseudo_real;
  throw std::invalid_argument("unknown fidelity profile '" + std::string(name) + "'");
}

struct FidelityProfile {
  FidelityKind kind = FidelityKind::sim;
  double depth_noise_sigma = 0.0;    // metres
  double distortion_strength = 0.0;  // barrel coefficient k in r' = r (1 + k r^2)
  double object_side = 0.05;         // metres
  double pick_failure_prob = 0.0;

  static FidelityProfile sim() { return {FidelityKind::sim, 0.0, 0.0, 0.05, 0.0}; }
  static FidelityProfile pseudo_real() {
    return {FidelityKind::pseudo_real, 0.003, 0.05, 0.065, 0.05};
  }

  void validate() const {
    if (!(depth_noise_sigma >= 0.0)) throw std::invalid_argument("depth_noise_sigma must be >= 0");
    if (!(pick_failure_prob >= 0.0 && pick_failure_prob < 1.0))
      throw std::invalid_argument("pick_failure_prob must be in [0, 1)");
    if (!(object_side > 0.0)) throw std::invalid_argument("object_side must be positive");
    if (!std::isfinite(distortion_strength))
      throw std::invalid_argument("distortion_strength must be finite");
  }

  friend bool operator==(const FidelityProfile&, const FidelityProfile&) = default;
};

// Banded suction reward. Bands are half-open on the left:
//   mu <= th -> r0, th < mu <= 2th -> r1, 2th < mu <= 3th -> r2, else r3.
struct RewardBands {
  double mu_th = 0.014;
  double r0 = 2000.0;
  double r1 = 1000.0;
  double r2 = 100.0;
  double r3 = 1.0;

  // Threshold used on the physical rig.
  static RewardBands physical_rig() { return {0.005, 2000.0, 1000.0, 100.0, 1.0}; }

  friend bool operator==(const RewardBands&, const RewardBands&) = default;
};

inline double sim_reward(double mu, bool success, const RewardBands& bands) {
  const double rs = success ? 1.0 : 0.0;
  if (mu <= bands.mu_th) return rs * bands.r0;
  if (mu <= 2.0 * bands.mu_th) return rs * bands.r1;
  if (mu <= 3.0 * bands.mu_th) return rs * bands.r2;
  return rs * bands.r3;
}

inline double real_reward(bool success, const RewardBands& bands) {
  return (success ? 1.0 : 0.0) * bands.r0;
}

struct WorkspaceGeometry {
  int cells = 16;         // grid is cells x cells
  double extent = 0.448;  // metres per side

  double cell_size() const { return extent / static_cast<double>(cells); }
  double cell_center(int index) const { return (static_cast<double>(index) + 0.5) * cell_size(); }

  friend bool operator==(const WorkspaceGeometry&, const WorkspaceGeometry&) = default;
};

struct Cell {
  int x = 0;  // column
  int y = 0;  // row
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct SceneObject {
  double cx = 0.0;  // tau, metres along x
  double cy = 0.0;  // sigma, metres along y
  double side = 0.05;
  double height = 0.05;
  double intensity = 1.0;
  std::vector<Cell> footprint;

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct WorkspaceState {
  WorkspaceGeometry geometry;
  std::vector<SceneObject> objects;

  std::size_t object_count() const { return objects.size(); }

  // Index of the object covering a cell, or -1.
  int object_at(int x, int y) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
      for (const Cell& c : objects[i].footprint)
        if (c.x == x && c.y == y) return static_cast<int>(i);
    return -1;
  }

  friend bool operator==(const WorkspaceState&, const WorkspaceState&) = default;
};

// Everything an environment instance needs besides its RNG and state.
struct EnvConfig {
  WorkspaceGeometry geometry;
  FidelityProfile profile = FidelityProfile::sim();
  RewardBands bands;
  int num_objects = 3;
  int empty_threshold = 1;  // reposition when object_count < this
  double background_intensity = 0.1;
  double min_intensity = 0.5;
  double max_intensity = 1.0;

  void validate() const {
    profile.validate();
    if (geometry.cells < 1 || !(geometry.extent > 0.0))
      throw std::invalid_argument("workspace geometry must be non-empty");
    if (num_objects < 1) throw std::invalid_argument("num_objects must be >= 1");
    if (empty_threshold < 1 || empty_threshold > num_objects)
      throw std::invalid_argument("empty_threshold must be in [1, num_objects]");
    if (!(bands.mu_th > 0.0)) throw std::invalid_argument("mu_th must be positive");
  }
};

// Cells whose centres fall inside the object's square.
inline std::vector<Cell> footprint_cells(const WorkspaceGeometry& g, double cx, double cy,
                                         double side) {
  std::vector<Cell> cells;
  const double half = side / 2.0;
  for (int y = 0; y < g.cells; ++y) {
    const double py = g.cell_center(y);
    if (py < cy - half || py > cy + half) continue;
    for (int x = 0; x < g.cells; ++x) {
      const double px = g.cell_center(x);
      if (px < cx - half || px > cx + half) continue;
      cells.push_back({x, y});
    }
  }
  return cells;
}

// Places `num_objects` cubes uniformly at random, footprints separated by at
// least one empty cell.
inline WorkspaceState reset(const EnvConfig& cfg, Rng& rng) {
  const WorkspaceGeometry& g = cfg.geometry;
  const double side = cfg.profile.object_side;
  if (side > g.extent) throw PlacementError("object larger than the workspace");
  constexpr int kAttemptsPerObject = 200;
  constexpr int kRestarts = 20;

  for (int restart = 0; restart < kRestarts; ++restart) {
    WorkspaceState ws{g, {}};
    Grid<int> blocked(g.cells, g.cells, 0);  // footprints dilated by one cell
    bool failed = false;
    for (int n = 0; n < cfg.num_objects && !failed; ++n) {
      bool placed = false;
      for (int attempt = 0; attempt < kAttemptsPerObject && !placed; ++attempt) {
        const double cx = side / 2.0 + uniform01(rng) * (g.extent - side);
        const double cy = side / 2.0 + uniform01(rng) * (g.extent - side);
        auto cells = footprint_cells(g, cx, cy, side);
        if (cells.empty()) continue;
        bool clash = false;
        for (const Cell& c : cells)
          if (blocked(c.y, c.x)) clash = true;
        if (clash) continue;
        const double intensity =
            cfg.min_intensity + uniform01(rng) * (cfg.max_intensity - cfg.min_intensity);
        for (const Cell& c : cells)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              if (blocked.contains(c.y + dy, c.x + dx)) blocked(c.y + dy, c.x + dx) = 1;
        ws.objects.push_back({cx, cy, side, side, intensity, std::move(cells)});
        placed = true;
      }
      failed = !placed;
    }
    if (!failed) return ws;
  }
  throw PlacementError("could not place " + std::to_string(cfg.num_objects) +
                       " objects without overlap");
}

// Noise-free orthographic projection.
inline Heightmaps project(const WorkspaceState& ws, double background_intensity) {
  const int n = ws.geometry.cells;
  Heightmaps hm{Grid<double>(n, n, background_intensity), Grid<double>(n, n, 0.0)};
  for (const SceneObject& obj : ws.objects) {
    for (const Cell& c : obj.footprint) {
      hm.color(c.y, c.x) = obj.intensity;
      hm.depth(c.y, c.x) = obj.height;
    }
  }
  return hm;
}

namespace detail {

// Samples `src` at fractional (row, col) with bilinear weights; outside the
// grid reads `outside`.
inline double bilinear(const Grid<double>& src, double row, double col, double outside) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;
  auto read = [&](int r, int c) { return src.contains(r, c) ? src(r, c) : outside; };
  return (1.0 - fr) * ((1.0 - fc) * read(r0, c0) + fc * read(r0, c0 + 1)) +
         fr * ((1.0 - fc) * read(r0 + 1, c0) + fc * read(r0 + 1, c0 + 1));
}

}  // namespace detail

// Radial barrel distortion: output cell at normalised radius r samples the
// undistorted image at radius r (1 + k r^2). Strength 0 returns the input.
inline Grid<double> barrel_distort(const Grid<double>& src, double strength, double outside) {
  if (strength == 0.0) return src;
  Grid<double> out(src.rows(), src.cols());
  const double half_r = src.rows() / 2.0;
  const double half_c = src.cols() / 2.0;
  for (int r = 0; r < src.rows(); ++r) {
    for (int c = 0; c < src.cols(); ++c) {
      const double v = (r + 0.5 - half_r) / half_r;
      const double u = (c + 0.5 - half_c) / half_c;
      const double scale = 1.0 + strength * (u * u + v * v);
      const double sr = v * scale * half_r + half_r - 0.5;
      const double sc = u * scale * half_c + half_c - 0.5;
      out(r, c) = detail::bilinear(src, sr, sc, outside);
    }
  }
  return out;
}

// Heightmaps as the agent's camera sees them. Sim is the exact projection;
// pseudo_real distorts both maps then adds clamped Gaussian depth noise.
inline Heightmaps observe(const WorkspaceState& ws, const EnvConfig& cfg, Rng& rng) {
  Heightmaps hm = project(ws, cfg.background_intensity);
  if (cfg.profile.kind == FidelityKind::sim) return hm;
  hm.color = barrel_distort(hm.color, cfg.profile.distortion_strength, cfg.background_intensity);
  hm.depth = barrel_distort(hm.depth, cfg.profile.distortion_strength, 0.0);
  if (cfg.profile.depth_noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.profile.depth_noise_sigma);
    for (double& d : hm.depth.values()) d = std::max(0.0, d + noise(rng));
  }
  return hm;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point cell_center(const WorkspaceGeometry& g, int x, int y) {
  return {g.cell_center(x), g.cell_center(y)};
}

// Distance to the nearest object centre and that object's index.
inline std::pair<double, std::size_t> distance_to_nearest(Point p, const WorkspaceState& ws) {
  if (ws.objects.empty()) throw std::invalid_argument("distance_to_nearest: empty workspace");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < ws.objects.size(); ++i) {
    const double dx = p.x - ws.objects[i].cx;
    const double dy = p.y - ws.objects[i].cy;
    const double mu = std::sqrt(dx * dx + dy * dy);
    if (mu < best) {
      best = mu;
      best_idx = i;
    }
  }
  return {best, best_idx};
}

inline std::pair<double, std::size_t> distance_to_nearest(const Action& a,
                                                          const WorkspaceState& ws) {
  if (a.x < 0 || a.y < 0 || a.x >= ws.geometry.cells || a.y >= ws.geometry.cells)
    throw std::out_of_range("distance_to_nearest: action outside the grid");
  return distance_to_nearest(cell_center(ws.geometry, a.x, a.y), ws);
}

struct StepOutcome {
  double reward = 0.0;
  bool success = false;
  double mu = 0.0;
  Heightmaps next_state;
  bool repositioned = false;
  std::size_t objects_before = 0;
  std::size_t objects_after = 0;  // after the pick, before any reposition
};

// Executes one suction attempt. On success the object is removed; when fewer
// than `empty_threshold` objects remain the workspace is repositioned. The
// returned next_state is observed after both.
inline StepOutcome attempt_pick(WorkspaceState& ws, const Action& action, const EnvConfig& cfg,
                                Rng& rng) {
  const int n = ws.geometry.cells;
  if (action.x < 0 || action.y < 0 || action.x >= n || action.y >= n)
    throw std::out_of_range("attempt_pick: action outside the grid");

  StepOutcome out;
  out.objects_before = ws.object_count();
  const auto [mu, nearest] = distance_to_nearest(action, ws);
  out.mu = mu;
  (void)nearest;

  const int hit = ws.object_at(action.x, action.y);
  bool success = hit >= 0;
  if (success && cfg.profile.kind == FidelityKind::pseudo_real && cfg.profile.pick_failure_prob > 0.0)
    success = uniform01(rng) >= cfg.profile.pick_failure_prob;
  out.success = success;
  out.reward = cfg.profile.kind == FidelityKind::sim ? sim_reward(mu, success, cfg.bands)
                                                     : real_reward(success, cfg.bands);
  if (success) ws.objects.erase(ws.objects.begin() + hit);
  out.objects_after = ws.object_count();

  if (static_cast<int>(ws.object_count()) < cfg.empty_threshold) {
    ws = reset(cfg, rng);
    out.repositioned = true;
  }
  out.next_state = observe(ws, cfg, rng);
  return out;
}

// One agent's environment: configuration, RNG stream and current workspace.
class SuctionEnv {
 public:
  SuctionEnv(EnvConfig cfg, Rng rng) : cfg_(std::move(cfg)), rng_(std::move(rng)) {
    cfg_.validate();
    ws_ = reset(cfg_, rng_);
  }

  const EnvConfig& config() const { return cfg_; }
  const WorkspaceState& workspace() const { return ws_; }
  const Rng& rng() const { return rng_; }

  Heightmaps observe() { return csar::observe(ws_, cfg_, rng_); }

  void reposition() { ws_ = reset(cfg_, rng_); }

  StepOutcome step(const Action& action) { return attempt_pick(ws_, action, cfg_, rng_); }

 private:
  EnvConfig cfg_;
  Rng rng_;
  WorkspaceState ws_;
};

}  // namespace csar

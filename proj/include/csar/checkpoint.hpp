#pragma once

// On-disk formats: parameter vectors as raw little-endian float64 with a JSON
// sidecar describing the layout, trainer checkpoints, workspace snapshots, and
// CSV heightmap dumps.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "csar/consensus_graph.hpp"
#include "csar/qfunction.hpp"
#include "csar/suction_env.hpp"

namespace csar {

using json = nlohmann::json;

inline json to_json(const Layout& layout) {
  json layers = json::array();
  for (const auto& l : layout.layers)
    layers.push_back({{"in_channels", l.in_channels},
                      {"out_channels", l.out_channels},
                      {"kernel", l.kernel},
                      {"relu", l.relu}});
  return {{"height", layout.height},
          {"width", layout.width},
          {"layers", layers},
          {"num_params", layout.num_params()}};
}

inline Layout layout_from_json(const json& j) {
  Layout layout;
  layout.height = j.at("height").get<int>();
  layout.width = j.at("width").get<int>();
  for (const auto& l : j.at("layers"))
    layout.layers.push_back({l.at("in_channels").get<int>(), l.at("out_channels").get<int>(),
                             l.at("kernel").get<int>(), l.at("relu").get<bool>()});
  layout.validate();
  return layout;
}

inline void write_f64_le(std::ostream& os, const std::vector<double>& values) {
  std::vector<char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b)
      bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<double> read_f64_le(std::istream& is) {
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw std::runtime_error("float64 array length is not a multiple of 8");
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return json::parse(is);
}

// Writes <stem>.bin and <stem>.json.
inline void save_parameters(const std::filesystem::path& stem, const ParameterVector& params) {
  std::ofstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + stem.string() + ".bin");
  write_f64_le(bin, params.weights);
  write_json_file(stem.string() + ".json",
                  {{"format", "float64-le"}, {"layout", to_json(params.layout)}});
}

inline ParameterVector load_parameters(const std::filesystem::path& stem) {
  const json meta = read_json_file(stem.string() + ".json");
  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + stem.string() + ".bin");
  ParameterVector p{layout_from_json(meta.at("layout")), read_f64_le(bin)};
  if (p.weights.size() != p.layout.num_params())
    throw std::runtime_error("parameter file length does not match its layout");
  return p;
}

// Trainer checkpoint: online and target stacks (M x n each) plus RNG states.
struct TrainerCheckpoint {
  int step = 0;
  Layout layout;
  ParameterStack params;
  ParameterStack targets;
  std::vector<std::string> policy_rng;
  std::vector<std::string> env_rng;
};

inline void save_checkpoint(const std::filesystem::path& stem, const TrainerCheckpoint& ck) {
  std::ofstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + stem.string() + ".bin");
  write_f64_le(bin, ck.params.values());
  write_f64_le(bin, ck.targets.values());
  write_json_file(stem.string() + ".json", {{"format", "float64-le"},
                                            {"step", ck.step},
                                            {"num_agents", ck.params.rows()},
                                            {"layout", to_json(ck.layout)},
                                            {"blocks", {"params", "targets"}},
                                            {"policy_rng", ck.policy_rng},
                                            {"env_rng", ck.env_rng}});
}

inline TrainerCheckpoint load_checkpoint(const std::filesystem::path& stem) {
  const json meta = read_json_file(stem.string() + ".json");
  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + stem.string() + ".bin");
  TrainerCheckpoint ck;
  ck.step = meta.at("step").get<int>();
  ck.layout = layout_from_json(meta.at("layout"));
  const int m = meta.at("num_agents").get<int>();
  const std::size_t n = ck.layout.num_params();
  const auto values = read_f64_le(bin);
  if (values.size() != 2 * static_cast<std::size_t>(m) * n)
    throw std::runtime_error("checkpoint length does not match its header");
  ck.params = ParameterStack(m, n);
  ck.targets = ParameterStack(m, n);
  for (int r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      ck.params(r, j) = values[static_cast<std::size_t>(r) * n + j];
      ck.targets(r, j) = values[static_cast<std::size_t>(m + r) * n + j];
    }
  ck.policy_rng = meta.at("policy_rng").get<std::vector<std::string>>();
  ck.env_rng = meta.at("env_rng").get<std::vector<std::string>>();
  return ck;
}

inline json to_json(const FidelityProfile& p) {
  return {{"kind", std::string(to_string(p.kind))},
          {"depth_noise_sigma", p.depth_noise_sigma},
          {"distortion_strength", p.distortion_strength},
          {"object_side", p.object_side},
          {"pick_failure_prob", p.pick_failure_prob}};
}

inline json to_json(const WorkspaceState& ws, const FidelityProfile& profile) {
  json objects = json::array();
  for (const auto& o : ws.objects) {
    json cells = json::array();
    for (const Cell& c : o.footprint) cells.push_back({c.x, c.y});
    objects.push_back({{"center", {o.cx, o.cy}},
                       {"side", o.side},
                       {"height", o.height},
                       {"intensity", o.intensity},
                       {"footprint", cells}});
  }
  return {{"bounds", {ws.geometry.extent, ws.geometry.extent}},
          {"cells", ws.geometry.cells},
          {"cell_size", ws.geometry.cell_size()},
          {"object_count", ws.object_count()},
          {"objects", objects},
          {"profile", to_json(profile)}};
}

inline WorkspaceState workspace_from_json(const json& j) {
  WorkspaceState ws;
  ws.geometry.cells = j.at("cells").get<int>();
  ws.geometry.extent = j.at("bounds").at(0).get<double>();
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.cx = o.at("center").at(0).get<double>();
    obj.cy = o.at("center").at(1).get<double>();
    obj.side = o.at("side").get<double>();
    obj.height = o.at("height").get<double>();
    obj.intensity = o.at("intensity").get<double>();
    for (const auto& c : o.at("footprint")) obj.footprint.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    ws.objects.push_back(std::move(obj));
  }
  return ws;
}

inline void write_grid_csv(std::ostream& os, const Grid<double>& g) {
  os.precision(17);
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      if (c) os << ',';
      os << g(r, c);
    }
    os << '\n';
  }
}

}  // namespace csar

#pragma once

// Agent-interaction graphs, their Laplacians, and the consensus map
// chi -> ((I_M - L) (x) I_n) chi applied to stacked parameter vectors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/SVD>

namespace csar {

struct GraphError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class TopologyKind { complete, star, path, custom };

inline std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::complete: return "complete";
    case TopologyKind::star: return "star";
    case TopologyKind::path: return "path";
    case TopologyKind::custom: return "custom";
  }
  return "unknown";
}

inline TopologyKind parse_topology_kind(std::string_view name) {
  if (name == "complete") return TopologyKind::complete;
  if (name == "star") return TopologyKind::star;
  if (name == "path") return TopologyKind::path;
  if (name == "custom") return TopologyKind::custom;
  throw GraphError("unknown topology kind '" + std::string(name) + "'");
}

struct Edge {
  int a = 0;
  int b = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Undirected weighted graph over agents 0..M-1. Edges are stored with a < b,
// sorted, and unique.
class Topology {
 public:
  Topology(int num_agents, std::vector<Edge> edges) : num_agents_(num_agents) {
    if (num_agents < 1) throw GraphError("topology needs at least one agent");
    for (Edge e : edges) {
      if (e.a < 0 || e.a >= num_agents || e.b < 0 || e.b >= num_agents)
        throw GraphError("edge references agent outside [0, M)");
      if (e.a == e.b) throw GraphError("self-edges are not allowed");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        throw GraphError("edge weights must be finite and positive");
      if (e.a > e.b) std::swap(e.a, e.b);
      edges_.push_back(e);
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& x, const Edge& y) {
      return std::pair(x.a, x.b) < std::pair(y.a, y.b);
    });
    for (std::size_t i = 1; i < edges_.size(); ++i) {
      if (edges_[i].a == edges_[i - 1].a && edges_[i].b == edges_[i - 1].b)
        throw GraphError("duplicate edge");
    }
  }

  int num_agents() const { return num_agents_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Unweighted degree of each agent.
  std::vector<int> degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(num_agents_), 0);
    for (const Edge& e : edges_) {
      ++deg[static_cast<std::size_t>(e.a)];
      ++deg[static_cast<std::size_t>(e.b)];
    }
    return deg;
  }

  int max_degree() const {
    const auto deg = degrees();
    return *std::max_element(deg.begin(), deg.end());
  }

  // Number of connected components (union-find).
  int components() const {
    std::vector<int> parent(static_cast<std::size_t>(num_agents_));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) {
        parent[static_cast<std::size_t>(x)] =
            parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        x = parent[static_cast<std::size_t>(x)];
      }
      return x;
    };
    int count = num_agents_;
    for (const Edge& e : edges_) {
      const int ra = find(e.a);
      const int rb = find(e.b);
      if (ra != rb) {
        parent[static_cast<std::size_t>(ra)] = rb;
        --count;
      }
    }
    return count;
  }

  bool connected() const { return components() == 1; }

 private:
  int num_agents_;
  std::vector<Edge> edges_;
};

// 1 / (d_max + 1) for the unweighted structure of `kind` over M agents. Makes
// I - L row-stochastic with a positive diagonal.
inline double default_edge_weight(TopologyKind kind, int num_agents) {
  if (num_agents < 1) throw GraphError("topology needs at least one agent");
  int d_max = 0;
  switch (kind) {
    case TopologyKind::complete: d_max = num_agents - 1; break;
    case TopologyKind::star: d_max = num_agents - 1; break;
    case TopologyKind::path: d_max = std::min(2, num_agents - 1); break;
    case TopologyKind::custom:
      throw GraphError("custom topologies carry explicit weights");
  }
  return 1.0 / static_cast<double>(d_max + 1);
}

inline double default_edge_weight(const Topology& structure) {
  return 1.0 / static_cast<double>(structure.max_degree() + 1);
}

// `custom_edges` is only consulted for TopologyKind::custom, where each edge
// carries its own weight. For the other kinds agent 0 (the pseudo-real agent)
// is the star hub and the path's first vertex.
inline Topology build_topology(TopologyKind kind, int num_agents, double edge_weight,
                               const std::vector<Edge>& custom_edges = {}) {
  if (num_agents < 1) throw GraphError("topology needs at least one agent");
  if (kind == TopologyKind::custom) return Topology(num_agents, custom_edges);
  if (!(edge_weight > 0.0) || !std::isfinite(edge_weight))
    throw GraphError("edge weight must be finite and positive");
  std::vector<Edge> edges;
  switch (kind) {
    case TopologyKind::complete:
      for (int a = 0; a < num_agents; ++a)
        for (int b = a + 1; b < num_agents; ++b) edges.push_back({a, b, edge_weight});
      break;
    case TopologyKind::star:
      for (int b = 1; b < num_agents; ++b) edges.push_back({0, b, edge_weight});
      break;
    case TopologyKind::path:
      for (int a = 0; a + 1 < num_agents; ++a) edges.push_back({a, a + 1, edge_weight});
      break;
    case TopologyKind::custom: break;
  }
  return Topology(num_agents, std::move(edges));
}

// M x M matrix L = D - A, row-major.
class LaplacianMatrix {
 public:
  explicit LaplacianMatrix(int m) : m_(m), entries_(static_cast<std::size_t>(m * m), 0.0) {
    if (m < 1) throw GraphError("laplacian needs at least one agent");
  }

  int size() const { return m_; }
  double& operator()(int row, int col) { return entries_[idx(row, col)]; }
  double operator()(int row, int col) const { return entries_[idx(row, col)]; }
  const std::vector<double>& entries() const { return entries_; }

  // Row-stochastic I - L with non-negative entries and positive diagonal:
  // the condition under which repeated consensus steps are stable.
  bool stable_mixing() const {
    for (int r = 0; r < m_; ++r) {
      if (!(1.0 - (*this)(r, r) > 0.0)) return false;
      for (int c = 0; c < m_; ++c)
        if (c != r && (*this)(r, c) > 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const LaplacianMatrix&, const LaplacianMatrix&) = default;

 private:
  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(m_) +
           static_cast<std::size_t>(col);
  }
  int m_;
  std::vector<double> entries_;
};

inline LaplacianMatrix laplacian(const Topology& t) {
  LaplacianMatrix lap(t.num_agents());
  for (const Edge& e : t.edges()) {
    lap(e.a, e.b) -= e.weight;
    lap(e.b, e.a) -= e.weight;
    lap(e.a, e.a) += e.weight;
    lap(e.b, e.b) += e.weight;
  }
  return lap;
}

// Numerical rank: singular values above 1e-9 * sigma_max.
inline int connectivity_rank(const LaplacianMatrix& lap) {
  const int m = lap.size();
  Eigen::MatrixXd dense(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) dense(r, c) = lap(r, c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double threshold = 1e-9 * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > threshold) ++rank;
  return rank;
}

// M rows of n parameters each, stored contiguously.
class ParameterStack {
 public:
  ParameterStack() = default;
  ParameterStack(int rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0) throw std::invalid_argument("parameter stack: negative row count");
  }
  explicit ParameterStack(const std::vector<std::vector<double>>& rows)
      : rows_(static_cast<int>(rows.size())), cols_(rows.empty() ? 0 : rows.front().size()) {
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& row : rows) {
      if (row.size() != cols_)
        throw std::invalid_argument("parameter stack: rows differ in length");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  int rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<double> row(int m) {
    return {data_.data() + static_cast<std::size_t>(m) * cols_, cols_};
  }
  std::span<const double> row(int m) const {
    return {data_.data() + static_cast<std::size_t>(m) * cols_, cols_};
  }

  double& operator()(int m, std::size_t j) { return data_[static_cast<std::size_t>(m) * cols_ + j]; }
  double operator()(int m, std::size_t j) const {
    return data_[static_cast<std::size_t>(m) * cols_ + j];
  }

  const std::vector<double>& values() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ParameterStack&, const ParameterStack&) = default;

 private:
  int rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// One consensus step. Row m becomes chi_m + sum_k a_mk (chi_k - chi_m) with
// a_mk = -l_mk, which equals row m of (I_M - L) chi whenever L has zero row
// sums. The difference form makes identical rows an exact fixed point.
inline ParameterStack consensus_step(const ParameterStack& params, const LaplacianMatrix& lap) {
  if (params.rows() != lap.size())
    throw std::invalid_argument("consensus_step: stack has " + std::to_string(params.rows()) +
                                " rows but laplacian is " + std::to_string(lap.size()) + "x" +
                                std::to_string(lap.size()));
  if (!params.all_finite()) throw std::domain_error("consensus_step: non-finite parameter");
  const int m_count = params.rows();
  const std::size_t n = params.cols();
  ParameterStack out = params;
  for (int m = 0; m < m_count; ++m) {
    auto dst = out.row(m);
    const auto self = params.row(m);
    for (int k = 0; k < m_count; ++k) {
      if (k == m) continue;
      const double a = -lap(m, k);
      if (a == 0.0) continue;
      const auto other = params.row(k);
      for (std::size_t j = 0; j < n; ++j) dst[j] += a * (other[j] - self[j]);
    }
  }
  return out;
}

inline ParameterStack iterate_consensus(ParameterStack params, const LaplacianMatrix& lap,
                                        int steps) {
  if (steps < 0) throw std::invalid_argument("iterate_consensus: negative step count");
  if (params.rows() != lap.size())
    throw std::invalid_argument("iterate_consensus: dimension mismatch");
  for (int s = 0; s < steps; ++s) params = consensus_step(params, lap);
  return params;
}

// Largest Euclidean distance between any two rows.
inline double max_pairwise_distance(const ParameterStack& params) {
  double best = 0.0;
  for (int a = 0; a < params.rows(); ++a) {
    for (int b = a + 1; b < params.rows(); ++b) {
      double sq = 0.0;
      for (std::size_t j = 0; j < params.cols(); ++j) {
        const double d = params(a, j) - params(b, j);
        sq += d * d;
      }
      best = std::max(best, std::sqrt(sq));
    }
  }
  return best;
}

}  // namespace csar

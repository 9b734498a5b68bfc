#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "csar/consensus_graph.hpp"

using namespace csar;

namespace {

// BFS component count over the edge list.
int bfs_components(int m, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
  for (const Edge& e : edges) {
    adj[static_cast<std::size_t>(e.a)].push_back(e.b);
    adj[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  int comps = 0;
  for (int s = 0; s < m; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++comps;
    std::queue<int> q;
    q.push(s);
    seen[static_cast<std::size_t>(s)] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[static_cast<std::size_t>(u)])
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          q.push(v);
        }
    }
  }
  return comps;
}

Topology random_topology(std::mt19937_64& gen, int m, double p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (u(gen) < p) edges.push_back({a, b, 0.05 + 0.1 * u(gen)});
  return Topology(m, edges);
}

ParameterStack random_stack(std::mt19937_64& gen, int m, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  ParameterStack s(m, n);
  for (int r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) s(r, j) = d(gen);
  return s;
}

}  // namespace

TEST(Topology, CompleteStarPathEdgeSets) {
  const auto complete = build_topology(TopologyKind::complete, 4, 0.25);
  EXPECT_EQ(complete.edges().size(), 6u);
  const auto star = build_topology(TopologyKind::star, 4, 0.25);
  ASSERT_EQ(star.edges().size(), 3u);
  for (const Edge& e : star.edges()) EXPECT_EQ(e.a, 0);
  const auto path = build_topology(TopologyKind::path, 4, 0.3);
  ASSERT_EQ(path.edges().size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(path.edges()[i].a, static_cast<int>(i));
    EXPECT_EQ(path.edges()[i].b, static_cast<int>(i) + 1);
  }
  EXPECT_TRUE(build_topology(TopologyKind::complete, 1, 0.5).edges().empty());
}

TEST(Topology, DefaultWeightIsOneOverMaxDegreePlusOne) {
  EXPECT_DOUBLE_EQ(default_edge_weight(TopologyKind::complete, 4), 0.25);
  EXPECT_DOUBLE_EQ(default_edge_weight(TopologyKind::star, 4), 0.25);
  EXPECT_DOUBLE_EQ(default_edge_weight(TopologyKind::path, 4), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(default_edge_weight(TopologyKind::path, 2), 0.5);
  EXPECT_DOUBLE_EQ(default_edge_weight(TopologyKind::complete, 1), 1.0);
}

TEST(Topology, RejectsMalformedEdges) {
  EXPECT_THROW(Topology(3, {{0, 0, 0.1}}), GraphError);
  EXPECT_THROW(Topology(3, {{0, 3, 0.1}}), GraphError);
  EXPECT_THROW(Topology(3, {{0, 1, 0.0}}), GraphError);
  EXPECT_THROW(Topology(3, {{0, 1, -1.0}}), GraphError);
  EXPECT_THROW(Topology(3, {{0, 1, 0.1}, {1, 0, 0.1}}), GraphError);
  EXPECT_THROW(Topology(0, {}), GraphError);
  EXPECT_THROW(parse_topology_kind("ring"), GraphError);
}

TEST(Laplacian, MatchesDegreeMinusAdjacency) {
  const Topology t(3, {{0, 1, 0.2}, {1, 2, 0.3}});
  const auto lap = laplacian(t);
  const double expected[3][3] = {{0.2, -0.2, 0.0}, {-0.2, 0.5, -0.3}, {0.0, -0.3, 0.3}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(lap(i, j), expected[i][j]);
}

TEST(Laplacian, RandomTopologiesArePsdWithZeroRowSums) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 1 + static_cast<int>(gen() % 8);
    const auto t = random_topology(gen, m, 0.4);
    const auto lap = laplacian(t);
    Eigen::MatrixXd dense(m, m);
    for (int i = 0; i < m; ++i) {
      double row = 0.0;
      for (int j = 0; j < m; ++j) {
        dense(i, j) = lap(i, j);
        row += lap(i, j);
        EXPECT_EQ(lap(i, j), lap(j, i));
      }
      EXPECT_LE(std::abs(row), 1e-12);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
    EXPECT_EQ(connectivity_rank(lap), m - bfs_components(m, t.edges()));
    EXPECT_EQ(t.connected(), bfs_components(m, t.edges()) == 1);
  }
}

TEST(Laplacian, StableMixingFollowsDegreeBound) {
  EXPECT_TRUE(laplacian(build_topology(TopologyKind::complete, 4, 0.25)).stable_mixing());
  EXPECT_FALSE(laplacian(build_topology(TopologyKind::complete, 4, 0.34)).stable_mixing());
}

TEST(Consensus, IdenticalRowsAreAFixedPoint) {
  std::mt19937_64 gen(3);
  const auto lap = laplacian(build_topology(TopologyKind::complete, 4, 0.25));
  ParameterStack s(4, 17);
  const auto row = random_stack(gen, 1, 17);
  for (int r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 17; ++j) s(r, j) = row(0, j);
  EXPECT_EQ(consensus_step(s, lap).values(), s.values());
}

TEST(Consensus, SingleAgentIsIdentity) {
  std::mt19937_64 gen(4);
  const auto s = random_stack(gen, 1, 9);
  const auto lap = laplacian(build_topology(TopologyKind::complete, 1, 1.0));
  EXPECT_EQ(consensus_step(s, lap).values(), s.values());
}

TEST(Consensus, MatchesDenseMixingMatrix) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 1 + static_cast<int>(gen() % 4);
    const std::size_t n = 1 + gen() % 8;
    const auto lap = laplacian(random_topology(gen, m, 0.6));
    const auto s = random_stack(gen, m, n);
    const auto out = consensus_step(s, lap);
    for (int i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (int k = 0; k < m; ++k) ref += ((i == k ? 1.0 : 0.0) - lap(i, k)) * s(k, j);
        EXPECT_NEAR(out(i, j), ref, 1e-12);
      }
  }
}

TEST(Consensus, PreservesMeanAndContracts) {
  std::mt19937_64 gen(6);
  const auto lap = laplacian(build_topology(TopologyKind::path, 5, 1.0 / 3.0));
  auto s = random_stack(gen, 5, 6);
  double prev = max_pairwise_distance(s);
  std::vector<double> mean0(6, 0.0);
  for (int r = 0; r < 5; ++r)
    for (std::size_t j = 0; j < 6; ++j) mean0[j] += s(r, j) / 5.0;
  for (int it = 0; it < 200; ++it) {
    s = consensus_step(s, lap);
    const double d = max_pairwise_distance(s);
    EXPECT_LE(d, prev + 1e-15);
    prev = d;
  }
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0.0;
    for (int r = 0; r < 5; ++r) mean += s(r, j) / 5.0;
    EXPECT_NEAR(mean, mean0[j], 1e-12);
  }
}

TEST(Consensus, RejectsBadInput) {
  const auto lap = laplacian(build_topology(TopologyKind::complete, 3, 1.0 / 3.0));
  EXPECT_THROW(consensus_step(ParameterStack(2, 4), lap), std::invalid_argument);
  ParameterStack s(3, 2);
  s(1, 1) = std::nan("");
  EXPECT_THROW(consensus_step(s, lap), std::domain_error);
}

TEST(Consensus, DisconnectedGraphKeepsComponentsApart) {
  const auto lap = laplacian(Topology(4, {{0, 1, 0.5}, {2, 3, 0.5}}));
  ParameterStack s(4, 1);
  s(0, 0) = 0.0;
  s(1, 0) = 2.0;
  s(2, 0) = 10.0;
  s(3, 0) = 20.0;
  const auto out = iterate_consensus(s, lap, 50);
  EXPECT_NEAR(out(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(out(3, 0), 15.0, 1e-12);
}

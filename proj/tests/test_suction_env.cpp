#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "csar/suction_env.hpp"

using namespace csar;

namespace {

EnvConfig config(FidelityProfile p = FidelityProfile::sim(), int objects = 3) {
  EnvConfig c;
  c.profile = p;
  c.num_objects = objects;
  return c;
}

}  // namespace

TEST(Rewards, BandsAreHalfOpenOnTheLeft) {
  const RewardBands b;
  const double th = b.mu_th, d = 1e-9;
  EXPECT_EQ(sim_reward(0.0, true, b), 2000.0);
  EXPECT_EQ(sim_reward(th, true, b), 2000.0);
  EXPECT_EQ(sim_reward(th + d, true, b), 1000.0);
  EXPECT_EQ(sim_reward(2 * th, true, b), 1000.0);
  EXPECT_EQ(sim_reward(2 * th + d, true, b), 100.0);
  EXPECT_EQ(sim_reward(3 * th, true, b), 100.0);
  EXPECT_EQ(sim_reward(3 * th + d, true, b), 1.0);
  EXPECT_EQ(sim_reward(0.0, false, b), 0.0);
  EXPECT_EQ(real_reward(true, b), 2000.0);
  EXPECT_EQ(real_reward(false, b), 0.0);
  EXPECT_EQ(RewardBands::physical_rig().mu_th, 0.005);
}

TEST(Geometry, FootprintSizes) {
  const WorkspaceGeometry g;
  EXPECT_DOUBLE_EQ(g.cell_size(), 0.028);
  // Centred on a cell centre: 0.05 covers 1x1, 0.065 covers 3x3 (half-sides
  // 0.025 and 0.0325 against 0.028 spacing).
  const double c = g.cell_center(5);
  EXPECT_EQ(footprint_cells(g, c, c, 0.05).size(), 1u);
  EXPECT_EQ(footprint_cells(g, c, c, 0.065).size(), 9u);
  // Centred on a cell corner: 2x2 for both.
  const double k = 6 * g.cell_size();
  EXPECT_EQ(footprint_cells(g, k, k, 0.05).size(), 4u);
  EXPECT_EQ(footprint_cells(g, k, k, 0.065).size(), 4u);
}

TEST(Reset, PlacesSeparatedObjectsDeterministically) {
  for (auto prof : {FidelityProfile::sim(), FidelityProfile::pseudo_real()}) {
    const EnvConfig cfg = config(prof, 5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng a = make_rng(seed), b = make_rng(seed);
      const auto ws = reset(cfg, a);
      EXPECT_EQ(ws, reset(cfg, b));
      ASSERT_EQ(ws.object_count(), 5u);
      for (std::size_t i = 0; i < ws.objects.size(); ++i) {
        EXPECT_FALSE(ws.objects[i].footprint.empty());
        for (std::size_t j = i + 1; j < ws.objects.size(); ++j)
          for (const Cell& p : ws.objects[i].footprint)
            for (const Cell& q : ws.objects[j].footprint)
              EXPECT_GT(std::max(std::abs(p.x - q.x), std::abs(p.y - q.y)), 1);
      }
    }
  }
}

TEST(Reset, OvercrowdedWorkspaceThrows) {
  Rng rng = make_rng(1);
  EXPECT_THROW(reset(config(FidelityProfile::sim(), 200), rng), PlacementError);
}

TEST(Observe, SimIsTheExactProjection) {
  const EnvConfig cfg = config();
  Rng rng = make_rng(2);
  const auto ws = reset(cfg, rng);
  const auto hm = observe(ws, cfg, rng);
  EXPECT_EQ(hm, project(ws, cfg.background_intensity));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const int o = ws.object_at(x, y);
      EXPECT_EQ(hm.depth(y, x), o < 0 ? 0.0 : ws.objects[static_cast<std::size_t>(o)].height);
      EXPECT_EQ(hm.color(y, x), o < 0 ? 0.1 : ws.objects[static_cast<std::size_t>(o)].intensity);
    }
}

TEST(Observe, PseudoRealWithoutGapMatchesProjection) {
  FidelityProfile p = FidelityProfile::pseudo_real();
  p.depth_noise_sigma = 0.0;
  p.distortion_strength = 0.0;
  const EnvConfig cfg = config(p);
  Rng rng = make_rng(3);
  const auto ws = reset(cfg, rng);
  EXPECT_EQ(observe(ws, cfg, rng), project(ws, cfg.background_intensity));
}

TEST(Observe, NoisyDepthStaysNonNegative) {
  FidelityProfile p = FidelityProfile::pseudo_real();
  p.depth_noise_sigma = 0.05;
  const EnvConfig cfg = config(p);
  Rng rng = make_rng(4);
  const auto ws = reset(cfg, rng);
  for (double d : observe(ws, cfg, rng).depth.values()) EXPECT_GE(d, 0.0);
}

TEST(Distortion, IdentityConstantAndSymmetry) {
  Grid<double> g(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) g(r, c) = r * 16 + c;
  EXPECT_EQ(barrel_distort(g, 0.0, 0.0), g);
  // Constant image with matching outside value stays constant.
  const auto flat = barrel_distort(Grid<double>(16, 16, 0.3), 0.2, 0.3);
  for (double v : flat.values()) EXPECT_NEAR(v, 0.3, 1e-15);
  // A point-symmetric image stays point-symmetric.
  Grid<double> sym(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) sym(r, c) = std::abs(r - 7.5) + 0.5 * std::abs(c - 7.5);
  const auto out = barrel_distort(sym, 0.1, 0.0);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) EXPECT_NEAR(out(r, c), out(15 - r, 15 - c), 1e-12);
}

TEST(Distortion, BilinearIsExactOnGridPoints) {
  Grid<double> g(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) g(r, c) = r * r + 3 * c;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(detail::bilinear(g, r, c, -1.0), g(r, c));
  EXPECT_DOUBLE_EQ(detail::bilinear(g, 0.5, 0.5, -1.0), (0 + 3 + 1 + 4) / 4.0);
  EXPECT_EQ(detail::bilinear(g, -5.0, 1.0, -1.0), -1.0);
}

TEST(Pick, HitRemovesObjectAndPaysBandedReward) {
  const EnvConfig cfg = config(FidelityProfile::sim(), 3);
  Rng rng = make_rng(5);
  auto ws = reset(cfg, rng);
  const Cell c = ws.objects[1].footprint.front();
  const auto out = attempt_pick(ws, {c.x, c.y, 0.05}, cfg, rng);
  EXPECT_TRUE(out.success);
  EXPECT_EQ(out.objects_before, 3u);
  EXPECT_EQ(out.objects_after, 2u);
  EXPECT_EQ(ws.object_count(), 2u);
  EXPECT_EQ(out.reward, sim_reward(out.mu, true, cfg.bands));
  EXPECT_FALSE(out.repositioned);
}

TEST(Pick, MissKeepsSceneAndPaysNothing) {
  const EnvConfig cfg = config(FidelityProfile::sim(), 3);
  Rng rng = make_rng(6);
  auto ws = reset(cfg, rng);
  const auto before = ws;
  int x = 0, y = 0;
  while (ws.object_at(x, y) >= 0) ++x;
  const auto out = attempt_pick(ws, {x, y, 0.0}, cfg, rng);
  EXPECT_FALSE(out.success);
  EXPECT_EQ(out.reward, 0.0);
  EXPECT_GT(out.mu, 0.0);
  EXPECT_EQ(ws, before);
  EXPECT_THROW(attempt_pick(ws, {16, 0, 0.0}, cfg, rng), std::out_of_range);
}

TEST(Pick, RepositionsWhenBelowThreshold) {
  const EnvConfig cfg = config(FidelityProfile::sim(), 1);
  Rng rng = make_rng(7);
  auto ws = reset(cfg, rng);
  const Cell c = ws.objects[0].footprint.front();
  const auto out = attempt_pick(ws, {c.x, c.y, 0.05}, cfg, rng);
  EXPECT_TRUE(out.success);
  EXPECT_TRUE(out.repositioned);
  EXPECT_EQ(out.objects_after, 0u);
  EXPECT_EQ(ws.object_count(), 1u);
  EXPECT_EQ(out.next_state, project(ws, cfg.background_intensity));
}

TEST(Pick, FailuresOnlyOnPseudoReal) {
  FidelityProfile p = FidelityProfile::pseudo_real();
  p.pick_failure_prob = 0.5;
  p.depth_noise_sigma = 0.0;
  int failures = 0;
  const EnvConfig cfg = config(p, 3);
  for (std::uint64_t s = 0; s < 400; ++s) {
    Rng rng = make_rng(s);
    auto ws = reset(cfg, rng);
    const Cell c = ws.objects[0].footprint.front();
    const auto out = attempt_pick(ws, {c.x, c.y, 0.0}, cfg, rng);
    failures += out.success ? 0 : 1;
    EXPECT_EQ(out.reward, out.success ? 2000.0 : 0.0);
  }
  EXPECT_NEAR(failures, 200, 40);
}

TEST(Env, SameSeedSameTrajectory) {
  const EnvConfig cfg = config(FidelityProfile::pseudo_real(), 3);
  SuctionEnv a(cfg, make_rng(8)), b(cfg, make_rng(8));
  for (int i = 0; i < 30; ++i) {
    const Action act{i % 16, (i * 7) % 16, 0.0};
    const auto oa = a.step(act);
    const auto ob = b.step(act);
    EXPECT_EQ(oa.next_state, ob.next_state);
    EXPECT_EQ(oa.reward, ob.reward);
  }
  EXPECT_EQ(a.workspace(), b.workspace());
}

TEST(Env, ConfigValidation) {
  EnvConfig c = config();
  c.empty_threshold = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config();
  c.profile.pick_failure_prob = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(parse_fidelity_kind("real"), std::invalid_argument);
}

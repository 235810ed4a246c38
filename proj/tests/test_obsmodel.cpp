#include <cmath>
#include <random>

#include "bsr/obsmodel.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bsr;

TEST_CASE("determinized cost closed form") {
  CHECK(determinized_cost({3.0, 5.0, 1.0}) == 3.0);
  CHECK(determinized_cost({1.0, 1.0, 0.5}) == doctest::Approx(2.0));
  CHECK(determinized_cost({2.0, 1.0, 0.25}) == doctest::Approx(5.0));
  CHECK(std::isinf(determinized_cost({1.0, 1.0, 0.0})));
}

TEST_CASE("determinized cost matches simulated self-loop chains") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> cost(0.5, 5.0);
  std::uniform_real_distribution<double> prob(0.2, 1.0);
  for (int i = 0; i < 5; ++i) {
    const SelfLoopCosts c{cost(rng), cost(rng), prob(rng)};
    const double mc = oracle::self_loop_mean_cost(c.success, c.recover, c.p_success, 20000, rng);
    CHECK(std::abs(mc - determinized_cost(c)) / determinized_cost(c) < 0.03);
  }
}

TEST_CASE("determinized cost is monotone") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double p = u(rng), q = u(rng);
    const double lo = std::min(p, q), hi = std::max(p, q);
    CHECK(determinized_cost({1.0, 2.0, lo}) >= determinized_cost({1.0, 2.0, hi}));
    CHECK(determinized_cost({1.0, 2.0, lo}) >= 1.0);
  }
}

TEST_CASE("occlusion example must-move sets") {
  const testing::OcclusionExample fig;
  using S = std::set<std::string>;
  CHECK(fig.must_move(fig.hypothesis({fig.x1, fig.x2, fig.x3})) == S{"A", "B", "C"});
  CHECK(fig.must_move(fig.hypothesis({fig.x1, fig.x3})) == S{"A", "C"});
  CHECK(fig.must_move(fig.hypothesis({fig.x1})) == S{"A"});
  CHECK(is_b_occluded(fig.hypothesis({fig.x1}), fig.known, {}, fig.scene));
}

TEST_CASE("visibility bound is the worst region point") {
  const testing::OcclusionExample fig;
  ParticleBelief a{"A", {{Pose{kWorldFrame, {0.7, 1.75}}, 0.3}, {Pose{kWorldFrame, {0.1, 1.75}}, 0.7}}};
  const auto region = fig.hypothesis({fig.x1, fig.x3});
  CHECK(visibility_lower_bound(region, a, {}, fig.scene) == doctest::Approx(0.7));
  CHECK(visibility_lower_bound(fig.hypothesis({fig.x3}), a, {}, fig.scene) == doctest::Approx(1.0));
  auto loose = region;
  loose.epsilon = 0.3;
  CHECK(test_vis(loose, a, {}, fig.scene));
  loose.epsilon = 0.29;
  CHECK_FALSE(test_vis(loose, a, {}, fig.scene));
}

TEST_CASE("visibility bound shrinks as the region grows") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto s = oracle::random_discrete_scene(rng);
    ObservationHypothesis small{"target", s.target.particles[0].pose, {s.target.particles[0].pose}};
    ObservationHypothesis large = small;
    for (const auto& p : s.target.particles) large.region.push_back(p.pose);
    for (const auto& occ : s.occluders)
      CHECK(visibility_lower_bound(large, occ, {}, s.scene) <=
            visibility_lower_bound(small, occ, {}, s.scene));
  }
}

TEST_CASE("observation sampler walks particles heaviest first") {
  ParticleBelief pb{"o",
                    {{Pose{kWorldFrame, {0.0, 0.0}}, 0.1},
                     {Pose{kWorldFrame, {0.05, 0.0}}, 0.5},
                     {Pose{"top", {0.05, 0.0}}, 0.4},
                     {Pose{kWorldFrame, {1.0, 0.0}}, 0.0}}};
  std::mt19937_64 rng(1);
  ObservationSampler sampler(pb, 0.1, 0.05, rng);
  CHECK(sampler.remaining() == 3);
  auto first = sampler.next();
  REQUIRE(first);
  CHECK(first->z.position == Vec2{0.05, 0.0});
  CHECK(first->region.size() == 2);
  CHECK(first->region_mass == doctest::Approx(0.6));
  auto second = sampler.next();
  REQUIRE(second);
  CHECK(second->z.frame == "top");
  CHECK(second->region_mass == doctest::Approx(0.4));
  sampler.next();
  CHECK_FALSE(sampler.next().has_value());

  std::mt19937_64 rng2(1);
  ObservationSampler drawer_only(pb, 0.1, 0.05, rng2, "top");
  CHECK(drawer_only.remaining() == 1);
}

TEST_CASE("detection bound") {
  ObservationHypothesis obs;
  obs.region_mass = 0.8;
  obs.epsilon = 0.1;
  CHECK(detection_probability_bound(obs, {1, 0.1}) == doctest::Approx(0.72));
  CHECK(detection_probability_bound(obs, {3, 0.1}) == doctest::Approx(0.72 * 0.81));
  CHECK(obs_cost(obs, {1, 0.1}) == doctest::Approx(1.0 / 0.72));
  obs.region_mass = 0.0;
  CHECK(std::isinf(obs_cost(obs, {1, 0.1})));
}

TEST_CASE("detection bound never exceeds the exact detection probability") {
  std::mt19937_64 rng(33);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    const auto s = oracle::random_discrete_scene(rng);
    std::map<std::string, ParticleBelief> occluders;
    for (const auto& o : s.occluders) occluders[o.object] = o;
    const DetectionConstants k{static_cast<int>(s.occluders.size()) + 1, 0.1};
    ObservationSampler sampler(s.target, 0.3, 0.2, rng);
    while (auto obs = sampler.next()) {
      if (is_b_occluded(*obs, occluders, {}, s.scene)) continue;
      ++checked;
      CHECK(detection_probability_bound(*obs, k) <=
            oracle::exact_detection(s, obs->region, k.p_fn) + 1e-12);
    }
  }
  CHECK(checked > 0);
}

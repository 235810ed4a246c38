#include <cmath>
#include <random>

#include "bsr/belief.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bsr;

TEST_CASE("particle updates match the histogram filter") {
  const oracle::CellWorld world;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.2);

  for (int sequence = 0; sequence < 25; ++sequence) {
    std::array<double, 5> prior{};
    double total = 0.0;
    for (double& v : prior) total += (v = 0.1 + u(rng));
    for (double& v : prior) v /= total;

    FactoredBelief b = world.particle_prior(prior);
    auto h = prior;
    const int truth = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int step = 0; step < 20; ++step) {
      if (u(rng) < 0.5) {
        const Vec2 z{world.cells[truth].x + noise(rng), world.cells[truth].y + noise(rng)};
        b = update_detection(b, "target", z, world.sensor, world.scene);
        h = oracle::histogram_detection(world, h, z);
      } else {
        b = update_no_detection(b, "target", world.sensor, world.scene);
        h = oracle::histogram_no_detection(world, h);
      }
      const auto mass = world.cell_mass(b.poses.at("target"));
      for (int i = 0; i < 5; ++i) CHECK(std::abs(mass[i] - h[i]) <= 1e-9);
    }
  }
}

TEST_CASE("updates keep weights normalized and non-negative") {
  const oracle::CellWorld world;
  FactoredBelief b = world.particle_prior({0.2, 0.2, 0.2, 0.2, 0.2});
  b = update_no_detection(b, "target", world.sensor, world.scene);
  double total = 0.0;
  for (const auto& p : b.poses.at("target").particles) {
    CHECK(p.weight >= 0.0);
    total += p.weight;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a detection where nothing is supported is degenerate") {
  const oracle::CellWorld world;
  FactoredBelief b = world.particle_prior({0.0, 0.0, 0.0, 0.0, 1.0});
  // Only the occluded cell has mass, so a detection has zero likelihood.
  CHECK_THROWS_AS(update_detection(b, "target", world.cells[4], world.sensor, world.scene),
                  DegenerateBelief);
}

TEST_CASE("visibility uses furniture and the MAP pose of other objects") {
  const oracle::CellWorld world;
  FactoredBelief b = world.particle_prior({0.2, 0.2, 0.2, 0.2, 0.2});
  CHECK(visibility(world.scene, world.sensor, b, "target", world.cells[0]) == 1.0);
  CHECK(visibility(world.scene, world.sensor, b, "target", world.cells[4]) == 0.0);
  b.poses["wall"].particles = {{Pose{kWorldFrame, {0.8, 1.75}}, 0.4},
                               {Pose{kWorldFrame, {0.2, 1.75}}, 0.6}};
  CHECK(visibility(world.scene, world.sensor, b, "target", world.cells[4]) == 1.0);

  const Scene kitchen = make_kitchen_scene();
  SensorModel sensor;
  sensor.camera = kitchen.camera;
  CHECK(visibility(kitchen, sensor, FactoredBelief{}, "block", {2.6, 0.5}) == 0.0);
}

TEST_CASE("sensor parameters are validated") {
  SensorModel sensor;
  CHECK_NOTHROW(sensor.validate());
  sensor.p_fn = 1.0;
  CHECK_THROWS(sensor.validate());
  sensor.p_fn = 0.1;
  sensor.sigma = Cov2{1.0, 2.0, 1.0};
  CHECK_THROWS(sensor.validate());
}

TEST_CASE("gaussian density integrates to one") {
  const Cov2 s{0.04, 0.01, 0.02};
  double sum = 0.0;
  const double step = 0.005;
  for (double x = -1.5; x <= 1.5; x += step)
    for (double y = -1.5; y <= 1.5; y += step) sum += gaussian_density({x, y}, s) * step * step;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("transition updates") {
  const Scene kitchen = make_kitchen_scene();
  FactoredBelief b;
  b.joints = {{"top", 0.0}, {"bottom", 0.0}};
  const Pose on_counter{kWorldFrame, {0.5, 0.83}};
  b.poses["block"] = ParticleBelief{"block", {{on_counter, 0.97}, {Pose{kWorldFrame, {0.9, 0.83}}, 0.03}}};

  Command move{CommandKind::move, Part::base, {0.5}};
  CHECK(transition_update(b, move, kitchen).robot.base == 0.5);

  Command pick{CommandKind::pick};
  pick.object = "block";
  pick.pose = on_counter;
  const FactoredBelief holding = transition_update(b, pick, kitchen);
  CHECK(holding.held.has_value());
  CHECK(holding.poses.count("block") == 0);
  CHECK_THROWS_AS(transition_update(holding, pick, kitchen), BeliefPreconditionError);

  Command place{CommandKind::place};
  place.object = "block";
  place.pose = Pose{kWorldFrame, {1.5, 0.83}};
  const FactoredBelief placed = transition_update(holding, place, kitchen);
  CHECK_FALSE(placed.held.has_value());
  CHECK(placed.poses.at("block").particles.size() == 1);

  Command press{CommandKind::press};
  const FactoredBelief on = transition_update(placed, press, kitchen);
  CHECK(on.stove_on);
  CHECK(on.cooked.count("block") == 1);

  Command pull{CommandKind::pull};
  pull.joint = "top";
  pull.extension = 0.4;
  CHECK(transition_update(b, pull, kitchen).joints.at("top") == 0.4);

  b.poses["block"].particles[0].weight = 0.5;
  b.poses["block"].particles[1].weight = 0.5;
  CHECK_THROWS_AS(transition_update(b, pick, kitchen), BeliefPreconditionError);
}

TEST_CASE("systematic resampling keeps the support and equalizes weights") {
  std::mt19937_64 rng(9);
  ParticleBelief pb{"o", {}};
  for (int i = 0; i < 10; ++i) pb.particles.push_back({Pose{kWorldFrame, {0.1 * i, 0.0}}, i == 3 ? 0.91 : 0.01});
  const ParticleBelief out = resample_if_degenerate(pb, rng);
  CHECK(out.particles.size() == 10);
  int at_heavy = 0;
  for (const auto& p : out.particles) {
    CHECK(p.weight == doctest::Approx(0.1));
    if (distance(p.pose.position, {0.3, 0.0}) < 1e-12) ++at_heavy;
  }
  CHECK(at_heavy >= 9);
}

TEST_CASE("beliefs round-trip through json") {
  FactoredBelief b;
  b.poses["x"] = ParticleBelief{"x", {{Pose{"top", {0.1, 0.2}}, 0.25}, {Pose{kWorldFrame, {1, 2}}, 0.75}}};
  b.joints = {{"top", 0.3}};
  b.held = Held{"y", Grasp{{0.0, 0.05}}};
  b.cooked = {"z"};
  CHECK(to_json(factored_belief_from_json(to_json(b))) == to_json(b));
}

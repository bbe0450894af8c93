#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "pipeforge/config.hpp"
#include "pipeforge/env.hpp"
#include "pipeforge/geometry.hpp"
#include "pipeforge/learn.hpp"
#include "pipeforge/nn.hpp"

using namespace pipeforge;

namespace {

struct Pipes {
  SimConfig sim;
  CollisionShape inner{make_cylinder_mesh(sim.inner_radius, sim.inner_length,
                                          sim.radial_segments, sim.axial_segments)};
  CollisionShape outer{make_pipe_mesh(sim.outer_inner_radius, sim.outer_outer_radius,
                                      sim.outer_length, sim.radial_segments,
                                      sim.axial_segments)};
};

const Pipes& pipes() {
  static const Pipes p;
  return p;
}

void BM_NarrowPhaseSeparated(benchmark::State& state) {
  const Pipes& p = pipes();
  const Pose pose = Pose::translation({-0.7, 0.0, 0.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(narrow_phase_contacts(p.inner, pose, p.outer, Pose{}, 1e-3));
  }
}
BENCHMARK(BM_NarrowPhaseSeparated);

// Tube pressed against the bore wall: the expensive case during an insertion.
void BM_NarrowPhaseWallContact(benchmark::State& state) {
  const Pipes& p = pipes();
  const Pose pose = Pose::translation({-0.1, 0.011, 0.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(narrow_phase_contacts(p.inner, pose, p.outer, Pose{}, 1e-3));
  }
}
BENCHMARK(BM_NarrowPhaseWallContact);

void BM_RayCastFan(benchmark::State& state) {
  const Pipes& p = pipes();
  const std::vector<SceneObject> scene = {
      {std::make_shared<const CollisionShape>(p.outer), Pose{}, 1},
  };
  const Vec3 origin{-0.6, 0.0, 0.0};
  const auto fan = ray_fan(origin, {0.0, 0.0, 0.0}, static_cast<int>(state.range(0)), 0.5);
  for (auto _ : state) {
    for (const Vec3& d : fan) benchmark::DoNotOptimize(ray_cast(origin, d, scene));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fan.size()));
}
BENCHMARK(BM_RayCastFan)->Arg(16)->Arg(128);

void BM_PolicyForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const PolicyParams policy = make_policy(8, TrainConfig{}, rng);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(8, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(policy_mean(policy, obs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicyForward)->Arg(1)->Arg(128);

void BM_EnvStep(benchmark::State& state) {
  const Config cfg = Config::desk();
  PipeEnv env(cfg.sim, static_cast<ObsMode>(state.range(0)));
  std::uint64_t seed = 0;
  env.reset(Condition::kInnerRandom, seed);
  for (auto _ : state) {
    if (env.step({5.0, 0.0, 0.0}).done) env.reset(Condition::kInnerRandom, ++seed);
  }
}
BENCHMARK(BM_EnvStep)
    ->Arg(static_cast<int>(ObsMode::kForce))
    ->Arg(static_cast<int>(ObsMode::kVisual));

}  // namespace

BENCHMARK_MAIN();

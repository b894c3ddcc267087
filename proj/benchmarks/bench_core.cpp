#include "rtk/arap.hpp"
#include "rtk/metrics.hpp"
#include "rtk/reconstruct.hpp"
#include "rtk/retarget.hpp"
#include "rtk/synth.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace rtk;

void BM_ForwardKinematics(benchmark::State& state) {
  const Skeleton skel = default_skeleton();
  ShapeParams beta;
  beta.beta[0] = 1.0;
  const BoneOffsets offsets = bone_offsets(skel, beta);
  Pose pose;
  for (int j = 0; j < kJointCount; ++j) {
    pose.theta[j] = Vec3(0.1 * j, -0.05 * j, 0.02 * j);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_kinematics(skel, offsets, pose));
  }
}
BENCHMARK(BM_ForwardKinematics);

// Loss plus gradient for one window of the pickup scenario.
void BM_RetargetLossGradient(benchmark::State& state) {
  const Skeleton skel = default_skeleton();
  ScenarioSpec spec;
  spec.motion = "pickup-box";
  spec.target.beta[0] = -2.0;
  const Scenario sc = generate(skel, spec);
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::vector<Pose> window(sc.source.frames.begin(), sc.source.frames.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<Constraint> constraints;
  for (const Constraint& c : sc.constraints.constraints) {
    if (c.frame < n) {
      constraints.push_back(c);
    }
  }
  RetargetConfig cfg;
  const RetargetObjective obj(skel, spec.source, spec.target, window, constraints, sc.constraints.camera,
                              JointWeights::from_depth(skel), cfg);
  OffsetSequence x = OffsetSequence::zeros(n, false);
  for (auto& e : x.e) {
    e[joints::kLeftElbow] = Vec3(0.1, 0.0, 0.05);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_gradient(obj, x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RetargetLossGradient)->Arg(15)->Arg(60);

LabeledMesh tube(int rings, int around) {
  LabeledMesh m;
  for (int r = 0; r < rings; ++r) {
    for (int a = 0; a < around; ++a) {
      const double phi = 2.0 * std::numbers::pi * a / around;
      m.vertices.emplace_back(static_cast<double>(r) / (rings - 1), 0.05 * std::cos(phi), 0.05 * std::sin(phi));
      m.labels.push_back(1 + r * kPartCount / rings);
    }
  }
  for (int r = 0; r + 1 < rings; ++r) {
    for (int a = 0; a < around; ++a) {
      const int i = r * around + a;
      const int j = r * around + (a + 1) % around;
      m.triangles.push_back({i, i + around, j + around});
      m.triangles.push_back({i, j + around, j});
    }
  }
  return m;
}

void BM_ArapSolve(benchmark::State& state) {
  const LabeledMesh bar = tube(static_cast<int>(state.range(0)) / 10, 10);
  const int n = static_cast<int>(bar.vertices.size());
  std::vector<ControlPoint> controls;
  for (int a = 0; a < 10; ++a) {
    controls.push_back({a, bar.vertices[a]});
    controls.push_back({n - 10 + a, bar.vertices[n - 10 + a] + Vec3(0.1, 0.05, 0.0)});
  }
  ArapConfig cfg;
  cfg.tolerance = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(arap_solve(bar, controls, cfg));
  }
}
BENCHMARK(BM_ArapSolve)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  Frame a = Frame::filled(side, side, 3, 0);
  Frame b = a;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] = static_cast<std::uint8_t>(rng());
    b.data[i] = static_cast<std::uint8_t>(rng());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ssim(a, b));
  }
}
BENCHMARK(BM_Ssim)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_SplineTrack(benchmark::State& state) {
  const Skeleton skel = default_skeleton();
  ScenarioSpec spec;
  spec.duration = 8.0;
  spec.noise_sigma = 0.02;
  const Scenario sc = generate(skel, spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_spline(sc.source, skel, spec.source, SplineConfig{}));
  }
}
BENCHMARK(BM_SplineTrack)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

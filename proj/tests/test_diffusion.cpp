#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "gagrasp/diffusion.hpp"
#include "gagrasp/equinet.hpp"

using namespace gagrasp;

namespace {

EquiNetConfig tiny_cfg() {
  EquiNetConfig cfg;
  cfg.blocks = 1;
  cfg.channels = 4;
  cfg.heads = 2;
  cfg.downsample_m = 6;
  cfg.downsample_k = 3;
  cfg.joint_dim = 4;
  return cfg;
}

std::vector<Vec3> tiny_cloud(std::mt19937_64& rng, int n = 12) {
  std::normal_distribution<double> nd;
  std::vector<Vec3> cloud;
  for (int i = 0; i < n; ++i) cloud.push_back({0.01 * nd(rng), 0.01 * nd(rng), 0.01 * nd(rng)});
  return cloud;
}

std::vector<double> randn(std::mt19937_64& rng, size_t n) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("linear schedule invariants") {
  DiffusionSchedule s = DiffusionSchedule::linear(100, 1e-4, 2e-2);
  REQUIRE(s.beta.size() == 100);
  CHECK(s.beta.front() == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.beta.back() == doctest::Approx(2e-2).epsilon(1e-12));
  CHECK(s.abar(0) == 1.0);
  double prod = 1.0;
  for (int t = 1; t <= 100; ++t) {
    CHECK(s.alpha[static_cast<size_t>(t - 1)] == 1.0 - s.beta[static_cast<size_t>(t - 1)]);
    prod *= s.alpha[static_cast<size_t>(t - 1)];
    CHECK(s.abar(t) == doctest::Approx(prod).epsilon(1e-12));
    CHECK(s.abar(t) < s.abar(t - 1));
  }
  CHECK_THROWS(s.check_step(0));
  CHECK_THROWS(s.check_step(101));
}

TEST_CASE("posterior variance matches the beta-tilde closed form") {
  DiffusionSchedule s = DiffusionSchedule::linear(50, 1e-4, 2e-2);
  for (int t = 2; t <= 50; ++t) {
    double want = s.beta[static_cast<size_t>(t - 1)] * (1.0 - s.abar(t - 1)) / (1.0 - s.abar(t));
    CHECK(s.sigma2[static_cast<size_t>(t - 1)] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("closed-form forward sample equals explicit chaining with shared noise") {
  DiffusionSchedule s = DiffusionSchedule::linear(10, 1e-3, 5e-2);
  std::mt19937_64 rng(71);
  const size_t dim = 13;
  std::vector<double> g0 = randn(rng, dim);
  std::vector<std::vector<double>> step_noise;
  for (int t = 0; t < 10; ++t) step_noise.push_back(randn(rng, dim));

  // chain g_t = sqrt(alpha_t) g_{t-1} + sqrt(1 - alpha_t) eps_t and fold the
  // per-step noises into the single equivalent epsilon of the closed form
  std::vector<double> g = g0;
  std::vector<double> folded(dim, 0.0);
  for (int t = 1; t <= 10; ++t) {
    double a = s.alpha[static_cast<size_t>(t - 1)];
    for (size_t i = 0; i < dim; ++i) {
      g[i] = std::sqrt(a) * g[i] + std::sqrt(1.0 - a) * step_noise[static_cast<size_t>(t - 1)][i];
      folded[i] = std::sqrt(a) * folded[i] +
                  std::sqrt(1.0 - a) * step_noise[static_cast<size_t>(t - 1)][i];
    }
    std::vector<double> eps(dim);
    double denom = std::sqrt(1.0 - s.abar(t));
    for (size_t i = 0; i < dim; ++i) eps[i] = folded[i] / denom;
    std::vector<double> closed = forward_sample(s, g0, t, eps);
    for (size_t i = 0; i < dim; ++i) CHECK(std::abs(closed[i] - g[i]) < 1e-10);
  }
}

TEST_CASE("forward sample with zero noise scales the signal by sqrt(abar)") {
  DiffusionSchedule s = DiffusionSchedule::linear(100, 1e-4, 2e-2);
  std::vector<double> g0(13, 1.0);
  std::vector<double> eps(13, 0.0);
  std::vector<double> gT = forward_sample(s, g0, 100, eps);
  double want = std::sqrt(s.abar(100));
  CHECK(want < 0.7);  // most of the signal is gone at t = T
  for (double v : gT) CHECK(v == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("guided step with lambda zero equals the plain reverse step") {
  DiffusionSchedule s = DiffusionSchedule::linear(20, 1e-4, 2e-2);
  std::mt19937_64 rng(72);
  Denoiser model(tiny_cfg(), 5);
  std::vector<Vec3> cloud = tiny_cloud(rng);
  PhysContext phys;
  phys.hand = toy_hand(2, 2);
  phys.obj_points = cloud;
  GuidanceConfig guide;
  guide.lambda = 0.0;
  for (int t : {20, 10, 2}) {
    std::vector<double> g_t = randn(rng, 13);
    std::vector<double> z = randn(rng, 13);
    std::vector<double> plain = reverse_step(s, model, cloud, g_t, t, z);
    std::vector<double> guided = guided_reverse_step(s, model, cloud, g_t, t, guide, phys, z);
    CHECK(plain == guided);
  }
}

TEST_CASE("guidance outside its step window changes nothing") {
  DiffusionSchedule s = DiffusionSchedule::linear(20, 1e-4, 2e-2);
  std::mt19937_64 rng(73);
  Denoiser model(tiny_cfg(), 6);
  std::vector<Vec3> cloud = tiny_cloud(rng);
  PhysContext phys;
  phys.hand = toy_hand(2, 2);
  phys.obj_points = cloud;
  GuidanceConfig guide;
  guide.lambda = 0.5;
  guide.t_start = 1;
  guide.t_end = 5;
  std::vector<double> g_t = randn(rng, 13);
  std::vector<double> z = randn(rng, 13);
  GuidedStepInfo info;
  std::vector<double> out = guided_reverse_step(s, model, cloud, g_t, 12, guide, phys, z, &info);
  CHECK_FALSE(info.applied);
  CHECK(out == reverse_step(s, model, cloud, g_t, 12, z));
}

TEST_CASE("active guidance reports a finite loss and bounded shift") {
  DiffusionSchedule s = DiffusionSchedule::linear(20, 1e-4, 2e-2);
  std::mt19937_64 rng(74);
  Denoiser model(tiny_cfg(), 8);
  std::vector<Vec3> cloud = tiny_cloud(rng);
  PhysContext phys;
  phys.hand = toy_hand(2, 2);
  phys.obj_points = cloud;
  phys.k_n = 300.0;
  phys.c_n = 2.0;
  phys.c_t = 3.0;
  GuidanceConfig guide;
  guide.lambda = 0.1;
  guide.t_start = 1;
  guide.t_end = 20;
  guide.clip = 1.0;
  std::vector<double> g_t = randn(rng, 13);
  std::vector<double> z = randn(rng, 13);
  GuidedStepInfo info;
  std::vector<double> out = guided_reverse_step(s, model, cloud, g_t, 5, guide, phys, z, &info);
  CHECK(info.applied);
  CHECK(std::isfinite(info.l_phys));
  std::vector<double> plain = reverse_step(s, model, cloud, g_t, 5, z);
  double shift = 0.0;
  for (size_t i = 0; i < out.size(); ++i) shift += (out[i] - plain[i]) * (out[i] - plain[i]);
  CHECK(std::sqrt(shift) <= guide.clip + 1e-12);
}

TEST_CASE("matched noise streams give identical samples") {
  DiffusionSchedule s = DiffusionSchedule::linear(15, 1e-4, 2e-2);
  std::mt19937_64 rng(75);
  Denoiser model(tiny_cfg(), 9);
  std::vector<Vec3> cloud = tiny_cloud(rng);
  NoiseStream ns = draw_noise_stream(s, 13, rng);
  REQUIRE(ns.z.size() == 14);  // one z per reverse step t = 15..2
  SampleResult a = sample_with_noise(s, model, cloud, ns);
  SampleResult b = sample_with_noise(s, model, cloud, ns);
  CHECK(a.grasp.flat() == b.grasp.flat());
  CHECK(a.flat_g0 == b.flat_g0);
}

TEST_CASE("seeded sampling is deterministic and joint count matches") {
  DiffusionSchedule s = DiffusionSchedule::linear(15, 1e-4, 2e-2);
  std::mt19937_64 rng_cloud(76);
  Denoiser model(tiny_cfg(), 10);
  std::vector<Vec3> cloud = tiny_cloud(rng_cloud);
  std::mt19937_64 r1(123), r2(123), r3(124);
  SampleResult a = sample(s, model, cloud, r1);
  SampleResult b = sample(s, model, cloud, r2);
  SampleResult c = sample(s, model, cloud, r3);
  CHECK(a.grasp.flat() == b.grasp.flat());
  CHECK(a.grasp.flat() != c.grasp.flat());
  CHECK(a.grasp.q.size() == 4);
  // decoded rotation is orthonormal
  Mat3 R = rot6d_decode(a.grasp.r);
  Mat3 I = mat_mul(mat_transpose(R), R);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(I[i][j] - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("training loss is finite, positive, and deterministic per seed") {
  DiffusionSchedule s = DiffusionSchedule::linear(15, 1e-4, 2e-2);
  std::mt19937_64 rng(77);
  Denoiser model(tiny_cfg(), 11);
  std::vector<Vec3> cloud = tiny_cloud(rng);
  std::vector<TrainBatchItem> batch;
  for (int i = 0; i < 2; ++i) batch.push_back({&cloud, randn(rng, 13)});
  std::mt19937_64 r1(5), r2(5);
  double a = training_loss(s, model, batch, r1, false);
  double b = training_loss(s, model, batch, r2, false);
  CHECK(a == b);
  CHECK(a > 0.0);
  CHECK(std::isfinite(a));
}

TEST_CASE("training loss gradients accumulate and are nonzero") {
  DiffusionSchedule s = DiffusionSchedule::linear(15, 1e-4, 2e-2);
  std::mt19937_64 rng(78);
  Denoiser model(tiny_cfg(), 12);
  std::vector<Vec3> cloud = tiny_cloud(rng);
  std::vector<TrainBatchItem> batch{{&cloud, randn(rng, 13)}};
  model.params().zero_grad();
  std::mt19937_64 r(6);
  training_loss(s, model, batch, r, true);
  double total = 0.0;
  for (int i = 0; i < model.params().count(); ++i)
    for (double g : model.params().at(i).grad) total += std::abs(g);
  CHECK(total > 0.0);
  CHECK(std::isfinite(total));
}

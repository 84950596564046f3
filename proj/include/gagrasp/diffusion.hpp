#pragma once

#include <functional>
#include <optional>
#include <random>

#include "gagrasp/equinet.hpp"
#include "gagrasp/hand.hpp"
#include "gagrasp/physics.hpp"

namespace gagrasp {

struct DiffusionSchedule {
  int T = 100;
  std::vector<double> beta;       // beta[t-1] for t = 1..T
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // cumulative product
  std::vector<double> sigma2;     // posterior variance beta_tilde

  static DiffusionSchedule linear(int T = 100, double beta1 = 1e-4, double betaT = 2e-2);
  double abar(int t) const;  // alpha_bar at step t (abar(0) == 1)
  void check_step(int t) const;
};

struct GuidanceConfig {
  double lambda = 0.0;
  int t_start = 1;      // guidance active for t in [t_start, t_end]
  int t_end = 1 << 30;
  double clip = 1.0;    // cap on the per-step guidance shift norm (0 = off)
};

// g_t = sqrt(abar_t) g0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_sample(const DiffusionSchedule& s, const std::vector<double>& g0,
                                   int t, const std::vector<double>& eps);

std::vector<double> reverse_step(const DiffusionSchedule& s, const Denoiser& model,
                                 const std::vector<Vec3>& cloud, const std::vector<double>& g_t,
                                 int t, const std::vector<double>& z);

struct GuidedStepInfo {
  double l_phys = 0.0;
  double grad_norm = 0.0;
  bool applied = false;
  bool skipped_nonfinite = false;
};

std::vector<double> guided_reverse_step(const DiffusionSchedule& s, const Denoiser& model,
                                        const std::vector<Vec3>& cloud,
                                        const std::vector<double>& g_t, int t,
                                        const GuidanceConfig& guidance, const PhysContext& phys,
                                        const std::vector<double>& z,
                                        GuidedStepInfo* info = nullptr);

struct SampleTraceRow {
  int t;
  double l_phys;
  double grad_norm;
};

struct SampleResult {
  Grasp grasp;
  std::vector<double> flat_g0;  // pre-orthonormalization
  std::vector<SampleTraceRow> trace;
  int guidance_skips = 0;
};

// Pre-drawn noise for one sample: the initial g_T draw plus one z per
// reverse step t = T..2 (z[T-2] ... z[0] indexed by t-2).
struct NoiseStream {
  std::vector<double> g_T;
  std::vector<std::vector<double>> z;  // z[i] used at step t = i + 2
};

NoiseStream draw_noise_stream(const DiffusionSchedule& s, int dim, std::mt19937_64& rng);

SampleResult sample_with_noise(const DiffusionSchedule& s, const Denoiser& model,
                               const std::vector<Vec3>& cloud, const NoiseStream& noise,
                               const std::optional<GuidanceConfig>& guidance = std::nullopt,
                               const PhysContext* phys = nullptr, bool keep_trace = false);

SampleResult sample(const DiffusionSchedule& s, const Denoiser& model,
                    const std::vector<Vec3>& cloud, std::mt19937_64& rng,
                    const std::optional<GuidanceConfig>& guidance = std::nullopt,
                    const PhysContext* phys = nullptr, bool keep_trace = false);

// Training objective: builds the per-sample forward pass on the tape and
// returns the mean noise-prediction MSE over the batch; accumulates
// parameter gradients when with_grad is set.
struct TrainBatchItem {
  const std::vector<Vec3>* cloud;
  std::vector<double> g0;
};

double training_loss(const DiffusionSchedule& s, Denoiser& model,
                     const std::vector<TrainBatchItem>& batch, std::mt19937_64& rng,
                     bool with_grad);

}  // namespace gagrasp

#include "gagrasp/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace gagrasp {

DiffusionSchedule DiffusionSchedule::linear(int T, double beta1, double betaT) {
  if (T < 1) throw std::invalid_argument("DiffusionSchedule: T must be >= 1");
  DiffusionSchedule s;
  s.T = T;
  s.beta.resize(static_cast<size_t>(T));
  s.alpha.resize(static_cast<size_t>(T));
  s.alpha_bar.resize(static_cast<size_t>(T));
  s.sigma2.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    double b = (T == 1) ? beta1 : beta1 + (betaT - beta1) * (t - 1) / (T - 1);
    s.beta[static_cast<size_t>(t - 1)] = b;
    s.alpha[static_cast<size_t>(t - 1)] = 1.0 - b;
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<size_t>(t - 1)] = prod;
  }
  for (int t = 1; t <= T; ++t) {
    double abar_prev = s.abar(t - 1);
    double abar = s.abar(t);
    s.sigma2[static_cast<size_t>(t - 1)] =
        (1.0 - abar_prev) / (1.0 - abar) * s.beta[static_cast<size_t>(t - 1)];
  }
  return s;
}

double DiffusionSchedule::abar(int t) const {
  if (t == 0) return 1.0;
  check_step(t);
  return alpha_bar[static_cast<size_t>(t - 1)];
}

void DiffusionSchedule::check_step(int t) const {
  if (t < 1 || t > T) throw std::invalid_argument("diffusion: timestep out of [1, T]");
}

std::vector<double> forward_sample(const DiffusionSchedule& s, const std::vector<double>& g0,
                                   int t, const std::vector<double>& eps) {
  s.check_step(t);
  if (g0.size() != eps.size()) throw std::invalid_argument("forward_sample: size mismatch");
  double a = std::sqrt(s.abar(t));
  double b = std::sqrt(1.0 - s.abar(t));
  std::vector<double> out(g0.size());
  for (size_t i = 0; i < g0.size(); ++i) out[i] = a * g0[i] + b * eps[i];
  return out;
}

namespace {

std::vector<double> reverse_mean(const DiffusionSchedule& s, const Denoiser& model,
                                 const std::vector<Vec3>& cloud, const std::vector<double>& g_t,
                                 int t) {
  double abar = s.abar(t);
  double p_scale = 1.0 / std::sqrt(abar);
  std::vector<double> eps = model.eps(cloud, g_t, t, p_scale);
  double a = s.alpha[static_cast<size_t>(t - 1)];
  double b = s.beta[static_cast<size_t>(t - 1)];
  double coef = b / std::sqrt(1.0 - abar);
  double inv = 1.0 / std::sqrt(a);
  std::vector<double> mu(g_t.size());
  for (size_t i = 0; i < g_t.size(); ++i) mu[i] = inv * (g_t[i] - coef * eps[i]);
  return mu;
}

}  // namespace

std::vector<double> reverse_step(const DiffusionSchedule& s, const Denoiser& model,
                                 const std::vector<Vec3>& cloud, const std::vector<double>& g_t,
                                 int t, const std::vector<double>& z) {
  s.check_step(t);
  std::vector<double> mu = reverse_mean(s, model, cloud, g_t, t);
  if (t == 1) return mu;  // no noise at the final step
  double sigma = std::sqrt(s.sigma2[static_cast<size_t>(t - 1)]);
  for (size_t i = 0; i < mu.size(); ++i) mu[i] += sigma * z[i];
  return mu;
}

std::vector<double> guided_reverse_step(const DiffusionSchedule& s, const Denoiser& model,
                                        const std::vector<Vec3>& cloud,
                                        const std::vector<double>& g_t, int t,
                                        const GuidanceConfig& guidance, const PhysContext& phys,
                                        const std::vector<double>& z, GuidedStepInfo* info) {
  s.check_step(t);
  std::vector<double> mu = reverse_mean(s, model, cloud, g_t, t);
  if (info) *info = GuidedStepInfo{};

  if (guidance.lambda > 0.0 && t >= guidance.t_start && t <= guidance.t_end) {
    int k = static_cast<int>(g_t.size()) - 9;
    bool decodable = true;
    Grasp g;
    try {
      g = Grasp::from_flat(g_t, k);
      rot6d_decode(g.r);
    } catch (const std::exception&) {
      decodable = false;
    }
    if (decodable) {
      PhysLossResult pl;
      bool finite = true;
      try {
        pl = phys_loss(g, phys, true);
      } catch (const std::exception&) {
        finite = false;
      }
      if (finite)
        for (double v : pl.grad)
          if (!std::isfinite(v)) finite = false;
      if (finite) {
        double gn = 0.0;
        for (double v : pl.grad) gn += v * v;
        gn = std::sqrt(gn);
        double scale = guidance.lambda;
        double shift = scale * gn;
        if (guidance.clip > 0.0 && shift > guidance.clip) scale *= guidance.clip / shift;
        // descend the physics loss: shift the mean against its gradient
        for (size_t i = 0; i < mu.size(); ++i) mu[i] -= scale * pl.grad[i];
        if (info) {
          info->l_phys = pl.total;
          info->grad_norm = gn;
          info->applied = true;
        }
      } else if (info) {
        info->skipped_nonfinite = true;
      }
    } else if (info) {
      info->skipped_nonfinite = true;
    }
  }

  if (t == 1) return mu;
  double sigma = std::sqrt(s.sigma2[static_cast<size_t>(t - 1)]);
  for (size_t i = 0; i < mu.size(); ++i) mu[i] += sigma * z[i];
  return mu;
}

NoiseStream draw_noise_stream(const DiffusionSchedule& s, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  NoiseStream ns;
  ns.g_T.resize(static_cast<size_t>(dim));
  for (auto& v : ns.g_T) v = nd(rng);
  for (int t = s.T; t >= 2; --t) {
    std::vector<double> z(static_cast<size_t>(dim));
    for (auto& v : z) v = nd(rng);
    ns.z.push_back(std::move(z));
  }
  return ns;
}

SampleResult sample_with_noise(const DiffusionSchedule& s, const Denoiser& model,
                               const std::vector<Vec3>& cloud, const NoiseStream& noise,
                               const std::optional<GuidanceConfig>& guidance,
                               const PhysContext* phys, bool keep_trace) {
  int dim = 9 + model.config().joint_dim;
  if (noise.g_T.size() != static_cast<size_t>(dim))
    throw std::invalid_argument("sample_with_noise: noise dimension mismatch");
  std::vector<double> g = noise.g_T;
  std::vector<double> zero(static_cast<size_t>(dim), 0.0);
  SampleResult out;
  for (int t = s.T; t >= 1; --t) {
    const std::vector<double>& z =
        (t >= 2) ? noise.z.at(static_cast<size_t>(s.T - t)) : zero;
    if (guidance && phys) {
      GuidedStepInfo info;
      g = guided_reverse_step(s, model, cloud, g, t, *guidance, *phys, z, &info);
      if (info.skipped_nonfinite) ++out.guidance_skips;
      if (keep_trace) out.trace.push_back({t, info.l_phys, info.grad_norm});
    } else {
      g = reverse_step(s, model, cloud, g, t, z);
    }
  }
  out.flat_g0 = g;
  Grasp raw = Grasp::from_flat(g, model.config().joint_dim);
  raw.r = rot6d_encode(rot6d_decode(raw.r));  // re-orthonormalize at final decode
  out.grasp = raw;
  return out;
}

SampleResult sample(const DiffusionSchedule& s, const Denoiser& model,
                    const std::vector<Vec3>& cloud, std::mt19937_64& rng,
                    const std::optional<GuidanceConfig>& guidance, const PhysContext* phys,
                    bool keep_trace) {
  NoiseStream ns = draw_noise_stream(s, 9 + model.config().joint_dim, rng);
  return sample_with_noise(s, model, cloud, ns, guidance, phys, keep_trace);
}

double training_loss(const DiffusionSchedule& s, Denoiser& model,
                     const std::vector<TrainBatchItem>& batch, std::mt19937_64& rng,
                     bool with_grad) {
  if (batch.empty()) throw std::invalid_argument("training_loss: empty batch");
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> ud(1, s.T);
  double total = 0.0;
  for (const auto& item : batch) {
    int t = ud(rng);
    std::vector<double> eps(item.g0.size());
    for (auto& v : eps) v = nd(rng);
    std::vector<double> g_t = forward_sample(s, item.g0, t, eps);
    double p_scale = 1.0 / std::sqrt(s.abar(t));

    Tape tape;
    Denoiser::Binding bind = model.bind(tape);
    int out = model.forward(tape, bind, *item.cloud, g_t, t, p_scale);
    int loss = op_mse(tape, out, eps);
    total += tape.val(loss)[0];
    if (with_grad) {
      double seed = 1.0 / static_cast<double>(batch.size());
      tape.backward(loss, std::span<const double>(&seed, 1));
      model.accumulate_grads(tape, bind);
    }
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace gagrasp

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "gagrasp/embed.hpp"
#include "gagrasp/ops.hpp"
#include "gagrasp/tape.hpp"

namespace gagrasp {

struct EquiNetConfig {
  int blocks = 3;
  int channels = 8;
  int heads = 2;
  int downsample_m = 64;  // FPS target size, applied after the first block
  int downsample_k = 8;   // kNN pool size
  int joint_dim = 4;
  int t_embed = 16;       // sinusoidal diffusion-step feature width
  int aux_hidden = 32;
  bool symmetry_breaking = true;

  std::map<std::string, std::string> echo() const;
  static EquiNetConfig from_echo(const std::map<std::string, std::string>& kv);
  bool operator==(const EquiNetConfig&) const = default;
};

struct Param {
  std::string name;
  std::vector<int> dims;
  std::vector<double> value;
  std::vector<double> grad;
  size_t size() const;
};

class ParamStore {
 public:
  int add(const std::string& name, std::vector<int> dims, std::vector<double> init);
  Param& at(int i) { return params_[static_cast<size_t>(i)]; }
  const Param& at(int i) const { return params_[static_cast<size_t>(i)]; }
  Param& by_name(const std::string& name);
  int count() const { return static_cast<int>(params_.size()); }
  void zero_grad();
  size_t total_size() const;

 private:
  std::vector<Param> params_;
  std::map<std::string, int> index_;
};

// Farthest point sampling; seeded at the point farthest from the centroid,
// ties resolved toward the lowest index. Returns m indices.
std::vector<int> farthest_point_sample(const std::vector<Vec3>& pts, int m);
std::vector<int> k_nearest(const std::vector<Vec3>& pts, const Vec3& query, int k);

// Conditional noise predictor eps_theta(g_t, O, t) built from equivariant
// blocks with one down-sampling stage on the object tokens. The base
// translation is embedded pre-scaled by p_scale (the sampler passes
// 1/sqrt(alpha_bar_t)) so that translation symmetry commutes with the
// diffusion recursion.
class Denoiser {
 public:
  Denoiser(const EquiNetConfig& cfg, uint64_t seed);

  const EquiNetConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct Binding {
    std::vector<int> slots;  // one tape slot per parameter, manifest order
  };
  Binding bind(Tape& tape) const;
  void accumulate_grads(Tape& tape, const Binding& binding);

  // Records the full forward pass; returns the [1][9+k][1] output slot.
  // Throws on an empty cloud.
  int forward(Tape& tape, const Binding& binding, const std::vector<Vec3>& cloud,
              const std::vector<double>& g_flat, int t_step, double p_scale) const;

  // Convenience forward without gradient bookkeeping.
  std::vector<double> eps(const std::vector<Vec3>& cloud, const std::vector<double>& g_flat,
                          int t_step, double p_scale) const;

  void save(const std::string& path, const std::map<std::string, std::string>& config_echo) const;
  // Returns the stored config echo; throws on manifest mismatch.
  std::map<std::string, std::string> load(const std::string& path);

 private:
  EquiNetConfig cfg_;
  ParamStore params_;
};

std::vector<double> sinusoidal_features(int t, int width);

}  // namespace gagrasp

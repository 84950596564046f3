#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gagrasp/diffusion.hpp"
#include "gagrasp/equinet.hpp"
#include "gagrasp/hand.hpp"
#include "gagrasp/physics.hpp"

namespace gagrasp {

// Flat key = value run configuration. Every key has a default; parsing an
// unknown key throws.
struct RunConfig {
  uint64_t seed = 0;

  int hand_fingers = 2;
  int hand_joints_per_finger = 2;

  int objects = 8;
  int grasps_per_object = 25;
  int cloud_points = 256;
  int ood_copy = 1;

  int T = 100;
  double beta1 = 1e-4;
  double betaT = 2e-2;

  int blocks = 3;
  int channels = 8;
  int heads = 2;
  int downsample_m = 64;
  int downsample_k = 8;
  int symmetry_breaking = 1;

  double lr = 1e-3;
  int steps = 2000;
  int batch = 4;

  double lambda = 0.0;
  int guide_t_start = 1;
  int guide_t_end = 30;
  double guide_clip = 1.0;

  double mass = 0.1;
  double k_n = 300.0;
  double c_n = 2.0;
  double c_t = 3.0;
  double mu = 1.0;
  double dt = 0.01;
  int t_sim = 60;
  double alpha1 = 0.01;
  double alpha2 = 10.0;
  double v0_speed = 0.1;
  double fd_step = 1e-4;
  int physics_points = 64;

  std::string out_dir = "out";

  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  int joint_dim() const { return hand_fingers * hand_joints_per_finger; }
  EquiNetConfig net() const;
  DiffusionSchedule schedule() const;
  HandSpec hand() const;
  GuidanceConfig guidance() const;
  // Physics context on a (possibly FPS-subsampled) cloud.
  PhysContext phys(const std::vector<Vec3>& cloud, bool subsample = true) const;
};

struct CloudRecord {
  std::string label;
  std::vector<Vec3> points;
};

void write_cloud(const std::string& path, const CloudRecord& rec);
CloudRecord read_cloud(const std::string& path);

struct GraspRecord {
  Grasp grasp;
  std::optional<uint64_t> seed;
  std::optional<double> l_phys;
  std::optional<int> success;
};

void write_grasps(const std::string& path, const std::vector<GraspRecord>& recs);
std::vector<GraspRecord> read_grasps(const std::string& path);

std::string cloud_file(const std::string& dir, int i, bool ood = false);
std::string grasp_file(const std::string& dir, int i, bool ood = false);

// Synthesizes the toy dataset into cfg.out_dir: per object a surface point
// cloud plus success_eval-filtered antipodal grasps, and (when ood_copy is
// set) a rigidly transformed copy of each pair. Throws if a shape yields no
// passing grasp.
void gen_data(const RunConfig& cfg);

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps_run = 0;
  bool diverged = false;
};

// Adam on the denoising loss over the canonical dataset in dataset_dir.
// Writes the checkpoint and a per-step loss curve (step\tloss).
TrainReport train(const RunConfig& cfg, const std::string& dataset_dir,
                  const std::string& ckpt_path, const std::string& curve_path);

// Throws with the differing keys listed if the checkpoint's architecture
// does not match cfg.
std::vector<GraspRecord> sample_cmd(const RunConfig& cfg, const std::string& ckpt_path,
                                    const CloudRecord& cloud, int n, double lambda,
                                    uint64_t seed);

struct EvalReport {
  int n = 0;
  double success_rate = 0.0;
  double diversity = 0.0;
  std::vector<int> success;
  std::vector<double> l_phys;
};

EvalReport eval_cmd(const RunConfig& cfg, const std::vector<GraspRecord>& grasps,
                    const CloudRecord& cloud);
void write_eval_report(const std::string& report_path, const std::string& table_path,
                       const EvalReport& rep);

}  // namespace gagrasp

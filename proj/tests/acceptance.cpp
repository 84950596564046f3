// Acceptance gate: one PASS/FAIL line per release criterion, exit 0 only if
// every line passes. Run through ctest; expects to be started from anywhere
// (uses a scratch directory under /tmp).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gagrasp/embed.hpp"
#include "gagrasp/harness.hpp"
#include "gagrasp/verify.hpp"

using namespace gagrasp;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, double seconds, const std::string& detail) {
  std::printf("%s %s (%.2f s) %s\n", ok ? "PASS" : "FAIL", name.c_str(), seconds, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Timer {
  double t0 = now_seconds();
  double elapsed() const { return now_seconds() - t0; }
};

}  // namespace

int main() {
  std::string work = "/tmp/gagrasp_acceptance";
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  // 1. algebra exactness: full Cayley table vs the sign-sorting oracle plus
  //    the x ^ dual(x) = e0123 identity, all exact, under one second
  {
    Timer t;
    SuiteResult cayley = suite_cayley();
    bool dual_ok = true;
    for (int i = 0; i < 16 && dual_ok; ++i) {
      Multivector w = wedge(Multivector::blade(i), dual(Multivector::blade(i)));
      for (int j = 0; j < 16; ++j)
        if (w[j] != (j == kE0123 ? 1.0 : 0.0)) dual_ok = false;
    }
    double secs = t.elapsed();
    report("algebra-exactness", cayley.ok && dual_ok && secs < 1.0, secs,
           cayley.detail + (dual_ok ? ", dual identity exact" : ", dual identity BROKEN"));
  }

  // 2. embedding fidelity: motor actions on 1000 random points vs the 3x3
  //    matrix oracle, tolerance 1e-9
  {
    Timer t;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(-M_PI, M_PI);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Vec3 axis{nd(rng), nd(rng), nd(rng)};
      double n = norm(axis);
      axis = {axis[0] / n, axis[1] / n, axis[2] / n};
      Mat3 R = axis_angle_to_matrix(axis, ud(rng));
      Vec3 tr{nd(rng), nd(rng), nd(rng)};
      Versor u = motor_from_matrix(R, tr);
      for (int i = 0; i < 100; ++i) {
        Vec3 p{nd(rng), nd(rng), nd(rng)};
        Vec3 got = extract_point(u(embed_point(p)));
        Vec3 want = mat_apply(R, p);
        for (int k = 0; k < 3; ++k) want[k] += tr[k];
        for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
      }
    }
    report("embedding-fidelity", worst < 1e-9, t.elapsed(),
           "1000 points, worst err=" + std::to_string(worst) + " tol=1e-9");
  }

  // 3. layer and denoiser equivariance: 100 motors at 1e-9 per layer, full
  //    network at 1e-6, within one minute
  {
    Timer t;
    SuiteResult layers = suite_layer_equivariance(100, 1e-9);
    SuiteResult net = suite_denoiser_equivariance(20, 1e-6);
    double secs = t.elapsed();
    report("layer-equivariance", layers.ok && net.ok && secs < 60.0, secs,
           layers.detail + "; denoiser " + net.detail);
  }

  // 4. gradient correctness: every primitive and the full training loss vs
  //    central differences at step 1e-5, tolerance 1e-4
  {
    Timer t;
    SuiteResult prim = suite_gradient_primitives(1e-5, 1e-4);
    SuiteResult full = suite_gradient_training_loss(1e-5, 1e-4);
    report("gradient-correctness", prim.ok && full.ok, t.elapsed(),
           prim.detail + "; training loss " + full.detail);
  }

  // 5a. sampler symmetry with random weights: 20 motors, 1e-5 relative,
  //     joint coordinates bit-identical (enforced inside the suite)
  {
    Timer t;
    RunConfig cfg;
    Denoiser model(cfg.net(), 77);
    SuiteResult s = suite_sampler_symmetry(model, 20, 1e-5, 31);
    report("sampler-symmetry-random-weights", s.ok, t.elapsed(), s.detail);
  }

  // 6. training progress at the default desk scale: >= 50% loss reduction in
  //    2000 steps within 15 minutes, deterministic per seed
  RunConfig full_cfg;
  full_cfg.seed = 7;
  full_cfg.out_dir = work + "/data";
  std::string full_ckpt = work + "/model.ckpt";
  bool trained = false;
  {
    Timer t;
    std::string detail;
    bool ok = false;
    try {
      gen_data(full_cfg);
      // the 15-minute budget covers the training run; dataset synthesis is
      // timed separately in the overall criterion elapsed time
      Timer tt;
      TrainReport rep = train(full_cfg, full_cfg.out_dir, full_ckpt, work + "/loss_curve.txt");
      double secs = tt.elapsed();
      double drop = 1.0 - rep.final_loss / rep.initial_loss;

      RunConfig short_cfg = full_cfg;
      short_cfg.steps = 30;
      train(short_cfg, full_cfg.out_dir, work + "/det_a.ckpt", work + "/det_a.curve");
      train(short_cfg, full_cfg.out_dir, work + "/det_b.ckpt", work + "/det_b.curve");
      bool deterministic = read_bytes(work + "/det_a.ckpt") == read_bytes(work + "/det_b.ckpt");

      ok = !rep.diverged && drop >= 0.5 && secs < 900.0 && deterministic;
      trained = ok;
      detail = "loss " + std::to_string(rep.initial_loss) + " -> " +
               std::to_string(rep.final_loss) + " (" + std::to_string(100.0 * drop) +
               "% drop) in " + std::to_string(rep.steps_run) + " steps, " +
               std::to_string(secs) + " s training, " +
               (deterministic ? "repeat run byte-identical" : "NOT deterministic");
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    report("training-progress", ok, t.elapsed(), detail);
  }

  VerifyArtifacts art;
  art.cfg = full_cfg;
  art.ckpt = full_ckpt;

  // 5b. sampler symmetry again with the trained weights
  {
    Timer t;
    std::string detail;
    bool ok = false;
    if (trained) {
      Denoiser model(full_cfg.net(), 0);
      model.load(full_ckpt);
      SuiteResult s = suite_sampler_symmetry(model, 20, 1e-5, 32);
      ok = s.ok;
      detail = s.detail;
    } else {
      detail = "skipped: training criterion failed";
    }
    report("sampler-symmetry-trained-weights", ok, t.elapsed(), detail);
  }

  // 7. OOD robustness: success rate on randomly transformed clouds within
  //    the binomial 95% interval of canonical-pose success, > 100 samples
  {
    Timer t;
    std::string detail;
    bool ok = false;
    if (trained) {
      SuiteResult s = suite_ood(art, 56);
      ok = s.ok;
      detail = s.detail;
    } else {
      detail = "skipped: training criterion failed";
    }
    report("ood-robustness", ok, t.elapsed(), detail);
  }

  // 8. refinement ordering: guided success >= unguided, mean physics loss
  //    strictly lower in >= 80% of 20 matched pairs, lambda sweep monotone
  {
    Timer t;
    std::string detail;
    bool ok = false;
    if (trained) {
      SuiteResult s = suite_refinement(art, 20, true);
      ok = s.ok;
      detail = s.detail;
    } else {
      detail = "skipped: training criterion failed";
    }
    report("refinement-ordering", ok, t.elapsed(), detail);
  }

  // 9. physics sanity: unit examples, free-object stability loss identity,
  //    free-object success_eval failure by plain kinematics
  {
    Timer t;
    SuiteResult s = suite_physics_units();
    report("physics-sanity", s.ok, t.elapsed(), s.detail);
  }

  // 10. the self-contained verification ledger finishes under 10 minutes and
  //     exits 0 (it rebuilds its own mini pipeline from scratch)
  {
    Timer t;
    RunConfig cfg;
    std::ostringstream sink;
    int code = 2;
    std::string detail;
    try {
      code = verify_cmd(cfg, sink);
      detail = "exit " + std::to_string(code);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs = t.elapsed();
    report("verify-ledger", code == 0 && secs < 600.0, secs, detail);
  }

  if (g_failures > 0) {
    std::printf("ACCEPTANCE FAILED (%d criteria)\n", g_failures);
    return 2;
  }
  std::printf("ACCEPTANCE OK\n");
  return 0;
}

#include <CLI11.hpp>
#include <iostream>

#include "gagrasp/harness.hpp"
#include "gagrasp/verify.hpp"

namespace {

// exit codes: 0 success, 1 usage error, 2 suite failure, 3 numeric divergence
constexpr int kUsage = 1;
constexpr int kSuiteFailure = 2;
constexpr int kDivergence = 3;

gagrasp::RunConfig load_config(const std::string& path) {
  if (path.empty()) return gagrasp::RunConfig{};
  return gagrasp::RunConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SE(3)-equivariant grasp generation harness"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "flat key = value config file");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "synthesize the toy dataset");
  uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "dataset seed")->required();
  gen->add_option("--out", gen_out, "output directory (overrides config out_dir)");

  // train
  auto* tr = app.add_subcommand("train", "train the denoiser");
  uint64_t tr_seed = 0;
  std::string tr_data, tr_ckpt = "model.ckpt", tr_curve = "loss_curve.txt";
  tr->add_option("--seed", tr_seed, "training seed")->required();
  tr->add_option("--data", tr_data, "dataset directory (default: config out_dir)");
  tr->add_option("--ckpt", tr_ckpt, "checkpoint output path");
  tr->add_option("--curve", tr_curve, "loss curve output path");

  // sample
  auto* sa = app.add_subcommand("sample", "sample grasps from a checkpoint");
  uint64_t sa_seed = 0;
  std::string sa_ckpt, sa_cloud, sa_out = "samples.txt";
  int sa_n = 10;
  double sa_lambda = -1.0;
  sa->add_option("--seed", sa_seed, "sampling seed")->required();
  sa->add_option("--ckpt", sa_ckpt, "checkpoint path")->required();
  sa->add_option("--cloud", sa_cloud, "object point cloud file")->required();
  sa->add_option("--n", sa_n, "number of samples");
  sa->add_option("--lambda", sa_lambda, "guidance strength (default: config lambda)");
  sa->add_option("--out", sa_out, "grasp record output path");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate grasp records against a cloud");
  std::string ev_grasps, ev_cloud, ev_report = "eval_report.txt", ev_table = "eval_table.tsv";
  ev->add_option("--grasps", ev_grasps, "grasp record file")->required();
  ev->add_option("--cloud", ev_cloud, "object point cloud file")->required();
  ev->add_option("--report", ev_report, "report output path");
  ev->add_option("--table", ev_table, "tab-delimited table output path");

  // verify
  auto* ve = app.add_subcommand("verify", "run the full property-suite ledger");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    gagrasp::RunConfig cfg = load_config(config_path);

    if (gen->parsed()) {
      cfg.seed = gen_seed;
      if (!gen_out.empty()) cfg.out_dir = gen_out;
      gagrasp::gen_data(cfg);
      std::cout << "dataset written to " << cfg.out_dir << "\n";
      return 0;
    }
    if (tr->parsed()) {
      cfg.seed = tr_seed;
      std::string data_dir = tr_data.empty() ? cfg.out_dir : tr_data;
      gagrasp::TrainReport rep = gagrasp::train(cfg, data_dir, tr_ckpt, tr_curve);
      std::cout << "steps " << rep.steps_run << " initial_loss " << rep.initial_loss
                << " final_loss " << rep.final_loss << "\n";
      if (rep.diverged) {
        std::cerr << "train: diverged (loss exceeded 1000x initial)\n";
        return kDivergence;
      }
      std::cout << "checkpoint written to " << tr_ckpt << "\n";
      return 0;
    }
    if (sa->parsed()) {
      double lambda = sa_lambda >= 0.0 ? sa_lambda : cfg.lambda;
      gagrasp::CloudRecord cloud = gagrasp::read_cloud(sa_cloud);
      auto recs = gagrasp::sample_cmd(cfg, sa_ckpt, cloud, sa_n, lambda, sa_seed);
      gagrasp::write_grasps(sa_out, recs);
      std::cout << recs.size() << " grasps written to " << sa_out << "\n";
      return 0;
    }
    if (ev->parsed()) {
      gagrasp::CloudRecord cloud = gagrasp::read_cloud(ev_cloud);
      auto recs = gagrasp::read_grasps(ev_grasps);
      gagrasp::EvalReport rep = gagrasp::eval_cmd(cfg, recs, cloud);
      gagrasp::write_eval_report(ev_report, ev_table, rep);
      std::cout << "n " << rep.n << " success_rate " << rep.success_rate << " diversity "
                << rep.diversity << "\n";
      return 0;
    }
    if (ve->parsed()) {
      return gagrasp::verify_cmd(cfg, std::cout);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSuiteFailure;
  }
  return kUsage;
}

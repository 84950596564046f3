#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gagrasp/harness.hpp"
#include "gagrasp/physics.hpp"

using namespace gagrasp;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_cfg(const std::string& out) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.objects = 2;
  cfg.grasps_per_object = 2;
  cfg.cloud_points = 64;
  cfg.physics_points = 48;
  cfg.blocks = 1;
  cfg.channels = 4;
  cfg.downsample_m = 16;
  cfg.downsample_k = 4;
  cfg.T = 20;
  cfg.steps = 5;
  cfg.batch = 2;
  cfg.out_dir = out;
  return cfg;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string sub(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("config text round trip and unknown-key rejection") {
  RunConfig cfg;
  cfg.seed = 42;
  cfg.lambda = 0.25;
  cfg.out_dir = "somewhere";
  RunConfig back = RunConfig::from_text(cfg.to_text());
  CHECK(back.seed == 42);
  CHECK(back.lambda == 0.25);
  CHECK(back.out_dir == "somewhere");
  CHECK(back.to_text() == cfg.to_text());
  CHECK_THROWS(RunConfig::from_text("no_such_key = 1\n"));
  CHECK_THROWS(RunConfig::from_text("seed = banana\n"));
}

TEST_CASE("cloud record binary round trip is lossless") {
  TempDir dir("gagrasp_test_cloud");
  std::mt19937_64 rng(81);
  std::normal_distribution<double> nd;
  CloudRecord rec;
  rec.label = "sphere r=0.01";
  for (int i = 0; i < 50; ++i) rec.points.push_back({nd(rng), nd(rng), nd(rng)});
  std::string path = dir.sub("cloud.bin");
  write_cloud(path, rec);
  std::string bytes = read_bytes(path);
  CHECK(bytes.substr(0, 8) == "GACLOUD1");
  CloudRecord back = read_cloud(path);
  CHECK(back.label == rec.label);
  REQUIRE(back.points.size() == rec.points.size());
  for (size_t i = 0; i < rec.points.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(back.points[i][k] == rec.points[i][k]);
}

TEST_CASE("cloud reader rejects a corrupted magic") {
  TempDir dir("gagrasp_test_badmagic");
  CloudRecord rec;
  rec.label = "x";
  rec.points = {{0, 0, 0}};
  std::string path = dir.sub("cloud.bin");
  write_cloud(path, rec);
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(0);
  f.write("BADMAGIC", 8);
  f.close();
  CHECK_THROWS(read_cloud(path));
}

TEST_CASE("grasp record text round trip keeps full precision and metadata") {
  TempDir dir("gagrasp_test_grasps");
  std::mt19937_64 rng(82);
  std::normal_distribution<double> nd;
  std::vector<GraspRecord> recs(3);
  for (auto& r : recs) {
    for (double& v : r.grasp.r) v = nd(rng);
    for (double& v : r.grasp.p) v = nd(rng);
    r.grasp.q = {nd(rng), nd(rng), nd(rng), nd(rng)};
  }
  recs[0].seed = 12345;
  recs[0].l_phys = 0.0123456789012345678;
  recs[1].success = 1;
  std::string path = dir.sub("grasps.txt");
  write_grasps(path, recs);
  std::vector<GraspRecord> back = read_grasps(path);
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back[i].grasp.r == recs[i].grasp.r);
    CHECK(back[i].grasp.p == recs[i].grasp.p);
    CHECK(back[i].grasp.q == recs[i].grasp.q);
  }
  CHECK(back[0].seed == recs[0].seed);
  CHECK(back[0].l_phys == recs[0].l_phys);
  CHECK_FALSE(back[0].success.has_value());
  CHECK(back[1].success == 1);
  CHECK_FALSE(back[1].l_phys.has_value());
}

TEST_CASE("gen_data is byte-identical per seed and its grasps pass the filter") {
  TempDir a("gagrasp_test_gen_a"), b("gagrasp_test_gen_b");
  RunConfig ca = small_cfg(a.str()), cb = small_cfg(b.str());
  gen_data(ca);
  gen_data(cb);
  for (int i = 0; i < ca.objects; ++i) {
    CHECK(read_bytes(cloud_file(a.str(), i)) == read_bytes(cloud_file(b.str(), i)));
    CHECK(read_bytes(grasp_file(a.str(), i)) == read_bytes(grasp_file(b.str(), i)));
    CHECK(read_bytes(cloud_file(a.str(), i, true)) == read_bytes(cloud_file(b.str(), i, true)));
  }

  HandSpec hand = ca.hand();
  for (int i = 0; i < ca.objects; ++i) {
    CloudRecord cloud = read_cloud(cloud_file(a.str(), i));
    std::vector<GraspRecord> grasps = read_grasps(grasp_file(a.str(), i));
    CHECK(static_cast<int>(grasps.size()) == ca.grasps_per_object);
    PhysContext ctx = ca.phys(cloud.points, false);
    for (const auto& rec : grasps) {
      CHECK(success_eval(rec.grasp, cloud.points, hand, ctx).pass);
      CHECK(limit_loss(rec.grasp.q, hand.joint_lower(), hand.joint_upper()) == 0.0);
    }
  }
}

TEST_CASE("training is deterministic per seed and lr zero keeps the init") {
  TempDir dir("gagrasp_test_train");
  RunConfig cfg = small_cfg(dir.sub("data"));
  gen_data(cfg);

  train(cfg, dir.sub("data"), dir.sub("a.ckpt"), dir.sub("a.curve"));
  train(cfg, dir.sub("data"), dir.sub("b.ckpt"), dir.sub("b.curve"));
  CHECK(read_bytes(dir.sub("a.ckpt")) == read_bytes(dir.sub("b.ckpt")));
  CHECK(read_bytes(dir.sub("a.curve")) == read_bytes(dir.sub("b.curve")));

  RunConfig frozen = cfg;
  frozen.lr = 0.0;
  train(frozen, dir.sub("data"), dir.sub("z.ckpt"), dir.sub("z.curve"));
  Denoiser init(frozen.net(), frozen.seed);
  Denoiser loaded(frozen.net(), 0);
  loaded.load(dir.sub("z.ckpt"));
  for (int i = 0; i < init.params().count(); ++i)
    CHECK(init.params().at(i).value == loaded.params().at(i).value);
}

TEST_CASE("sampling: n zero, determinism, guidance metadata recomputes") {
  TempDir dir("gagrasp_test_sample");
  RunConfig cfg = small_cfg(dir.sub("data"));
  gen_data(cfg);
  train(cfg, dir.sub("data"), dir.sub("m.ckpt"), dir.sub("m.curve"));
  CloudRecord cloud = read_cloud(cloud_file(dir.sub("data"), 0));

  CHECK(sample_cmd(cfg, dir.sub("m.ckpt"), cloud, 0, 0.0, 5).empty());

  std::vector<GraspRecord> a = sample_cmd(cfg, dir.sub("m.ckpt"), cloud, 2, 0.0, 5);
  std::vector<GraspRecord> b = sample_cmd(cfg, dir.sub("m.ckpt"), cloud, 2, 0.0, 5);
  REQUIRE(a.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(a[i].grasp.flat() == b[i].grasp.flat());
    CHECK_FALSE(a[i].l_phys.has_value());  // no guidance, no metadata
  }

  std::vector<GraspRecord> g = sample_cmd(cfg, dir.sub("m.ckpt"), cloud, 1, 0.2, 6);
  REQUIRE(g.size() == 1);
  REQUIRE(g[0].l_phys.has_value());
  PhysContext ctx = cfg.phys(cloud.points);
  CHECK(std::abs(*g[0].l_phys - phys_loss_value(g[0].grasp, ctx)) < 1e-9);
}

TEST_CASE("sample_cmd rejects a checkpoint trained with another architecture") {
  TempDir dir("gagrasp_test_mismatch");
  RunConfig cfg = small_cfg(dir.sub("data"));
  gen_data(cfg);
  train(cfg, dir.sub("data"), dir.sub("m.ckpt"), dir.sub("m.curve"));
  CloudRecord cloud = read_cloud(cloud_file(dir.sub("data"), 0));
  RunConfig other = cfg;
  other.channels = 6;
  CHECK_THROWS(sample_cmd(other, dir.sub("m.ckpt"), cloud, 1, 0.0, 5));
}

TEST_CASE("eval on the dataset ground truth reports full success") {
  TempDir dir("gagrasp_test_eval");
  RunConfig cfg = small_cfg(dir.sub("data"));
  gen_data(cfg);
  CloudRecord cloud = read_cloud(cloud_file(dir.sub("data"), 0));
  std::vector<GraspRecord> grasps = read_grasps(grasp_file(dir.sub("data"), 0));
  EvalReport rep = eval_cmd(cfg, grasps, cloud);
  CHECK(rep.n == static_cast<int>(grasps.size()));
  CHECK(rep.success_rate == 1.0);
  CHECK(rep.diversity >= 0.0);
}

TEST_CASE("eval of identical failing grasps reports zero rate and diversity") {
  RunConfig cfg;
  cfg.cloud_points = 32;
  std::mt19937_64 rng(83);
  std::normal_distribution<double> nd;
  CloudRecord cloud;
  cloud.label = "test";
  for (int i = 0; i < 32; ++i) {
    Vec3 v{nd(rng), nd(rng), nd(rng)};
    double n = norm(v);
    cloud.points.push_back({0.01 * v[0] / n, 0.01 * v[1] / n, 0.01 * v[2] / n});
  }
  GraspRecord far;
  far.grasp.p = {0, 0, -0.5};
  far.grasp.q = {0, 0, 0, 0};
  EvalReport rep = eval_cmd(cfg, {far, far, far}, cloud);
  CHECK(rep.success_rate == 0.0);
  CHECK(rep.diversity == 0.0);
}

TEST_CASE("eval report files are written with the expected shape") {
  TempDir dir("gagrasp_test_report");
  EvalReport rep;
  rep.n = 2;
  rep.success_rate = 0.5;
  rep.diversity = 0.125;
  rep.success = {1, 0};
  rep.l_phys = {0.1, 0.2};
  write_eval_report(dir.sub("report.txt"), dir.sub("table.tsv"), rep);
  std::string report = read_bytes(dir.sub("report.txt"));
  CHECK(report.find("success_rate") != std::string::npos);
  CHECK(report.find("diversity") != std::string::npos);
  std::string table = read_bytes(dir.sub("table.tsv"));
  CHECK(table.find('\t') != std::string::npos);
}

#include "gagrasp/harness.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gagrasp {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct KeyHandler {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

double parse_double(const std::string& s) {
  size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("config: bad numeric value '" + s + "'");
  return v;
}

int64_t parse_int(const std::string& s) {
  size_t pos = 0;
  long long v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("config: bad integer value '" + s + "'");
  return v;
}

const std::map<std::string, KeyHandler>& key_table() {
  static const std::map<std::string, KeyHandler> table = [] {
    std::map<std::string, KeyHandler> t;
    auto add_int = [&t](const std::string& k, int RunConfig::* f) {
      t[k] = {[f](const RunConfig& c) { return std::to_string(c.*f); },
              [f](RunConfig& c, const std::string& v) { c.*f = static_cast<int>(parse_int(v)); }};
    };
    auto add_dbl = [&t](const std::string& k, double RunConfig::* f) {
      t[k] = {[f](const RunConfig& c) { return fmt(c.*f); },
              [f](RunConfig& c, const std::string& v) { c.*f = parse_double(v); }};
    };
    t["seed"] = {[](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) {
                   c.seed = static_cast<uint64_t>(std::stoull(v));
                 }};
    add_int("hand_fingers", &RunConfig::hand_fingers);
    add_int("hand_joints_per_finger", &RunConfig::hand_joints_per_finger);
    add_int("objects", &RunConfig::objects);
    add_int("grasps_per_object", &RunConfig::grasps_per_object);
    add_int("cloud_points", &RunConfig::cloud_points);
    add_int("ood_copy", &RunConfig::ood_copy);
    add_int("T", &RunConfig::T);
    add_dbl("beta1", &RunConfig::beta1);
    add_dbl("betaT", &RunConfig::betaT);
    add_int("blocks", &RunConfig::blocks);
    add_int("channels", &RunConfig::channels);
    add_int("heads", &RunConfig::heads);
    add_int("downsample_m", &RunConfig::downsample_m);
    add_int("downsample_k", &RunConfig::downsample_k);
    add_int("symmetry_breaking", &RunConfig::symmetry_breaking);
    add_dbl("lr", &RunConfig::lr);
    add_int("steps", &RunConfig::steps);
    add_int("batch", &RunConfig::batch);
    add_dbl("lambda", &RunConfig::lambda);
    add_int("guide_t_start", &RunConfig::guide_t_start);
    add_int("guide_t_end", &RunConfig::guide_t_end);
    add_dbl("guide_clip", &RunConfig::guide_clip);
    add_dbl("mass", &RunConfig::mass);
    add_dbl("k_n", &RunConfig::k_n);
    add_dbl("c_n", &RunConfig::c_n);
    add_dbl("c_t", &RunConfig::c_t);
    add_dbl("mu", &RunConfig::mu);
    add_dbl("dt", &RunConfig::dt);
    add_int("t_sim", &RunConfig::t_sim);
    add_dbl("alpha1", &RunConfig::alpha1);
    add_dbl("alpha2", &RunConfig::alpha2);
    add_dbl("v0_speed", &RunConfig::v0_speed);
    add_dbl("fd_step", &RunConfig::fd_step);
    add_int("physics_points", &RunConfig::physics_points);
    t["out_dir"] = {[](const RunConfig& c) { return c.out_dir; },
                    [](RunConfig& c, const std::string& v) { c.out_dir = v; }};
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [k, h] : key_table()) os << k << " = " << h.get(*this) << "\n";
  return os.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' in line '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto it = key_table().find(key);
    if (it == key_table().end())
      throw std::invalid_argument("config: unknown key '" + key + "'");
    it->second.set(cfg, val);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return from_text(os.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot write " + path);
  f << to_text();
}

EquiNetConfig RunConfig::net() const {
  EquiNetConfig n;
  n.blocks = blocks;
  n.channels = channels;
  n.heads = heads;
  n.downsample_m = downsample_m;
  n.downsample_k = downsample_k;
  n.joint_dim = joint_dim();
  n.symmetry_breaking = symmetry_breaking != 0;
  return n;
}

DiffusionSchedule RunConfig::schedule() const { return DiffusionSchedule::linear(T, beta1, betaT); }

HandSpec RunConfig::hand() const { return toy_hand(hand_fingers, hand_joints_per_finger); }

GuidanceConfig RunConfig::guidance() const {
  GuidanceConfig g;
  g.lambda = lambda;
  g.t_start = guide_t_start;
  g.t_end = guide_t_end;
  g.clip = guide_clip;
  return g;
}

PhysContext RunConfig::phys(const std::vector<Vec3>& cloud, bool subsample) const {
  PhysContext ctx;
  ctx.hand = hand();
  if (subsample && static_cast<int>(cloud.size()) > physics_points) {
    std::vector<int> idx = farthest_point_sample(cloud, physics_points);
    for (int i : idx) ctx.obj_points.push_back(cloud[static_cast<size_t>(i)]);
  } else {
    ctx.obj_points = cloud;
  }
  ctx.mass = mass;
  ctx.k_n = k_n;
  ctx.c_n = c_n;
  ctx.c_t = c_t;
  ctx.mu = mu;
  ctx.dt = dt;
  ctx.T_sim = t_sim;
  ctx.alpha1 = alpha1;
  ctx.alpha2 = alpha2;
  ctx.v0_speed = v0_speed;
  ctx.fd_step = fd_step;
  return ctx;
}

// ---------------------------------------------------------------------------
// File formats

namespace {

constexpr char kCloudMagic[8] = {'G', 'A', 'C', 'L', 'O', 'U', 'D', '1'};

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

double get_f64(std::istream& is) {
  uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void write_cloud(const std::string& path, const CloudRecord& rec) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_cloud: cannot write " + path);
  f.write(kCloudMagic, 8);
  put_u64(f, rec.points.size());
  put_u64(f, rec.label.size());
  f.write(rec.label.data(), static_cast<std::streamsize>(rec.label.size()));
  for (const auto& p : rec.points)
    for (double c : p) put_f64(f, c);
}

CloudRecord read_cloud(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_cloud: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCloudMagic, 8) != 0)
    throw std::runtime_error("read_cloud: bad magic in " + path);
  uint64_t n = get_u64(f);
  uint64_t labellen = get_u64(f);
  CloudRecord rec;
  rec.label.resize(labellen);
  f.read(rec.label.data(), static_cast<std::streamsize>(labellen));
  rec.points.resize(n);
  for (auto& p : rec.points)
    for (double& c : p) c = get_f64(f);
  if (!f) throw std::runtime_error("read_cloud: truncated file " + path);
  return rec;
}

void write_grasps(const std::string& path, const std::vector<GraspRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_grasps: cannot write " + path);
  for (const auto& rec : recs) {
    f << "r";
    for (double v : rec.grasp.r) f << " " << fmt(v);
    f << " p";
    for (double v : rec.grasp.p) f << " " << fmt(v);
    f << " q";
    for (double v : rec.grasp.q) f << " " << fmt(v);
    if (rec.seed) f << " seed " << *rec.seed;
    if (rec.l_phys) f << " l_phys " << fmt(*rec.l_phys);
    if (rec.success) f << " success " << *rec.success;
    f << "\n";
  }
}

std::vector<GraspRecord> read_grasps(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_grasps: cannot open " + path);
  std::vector<GraspRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream is(line);
    GraspRecord rec;
    std::string tok;
    if (!(is >> tok) || tok != "r")
      throw std::runtime_error("read_grasps: expected 'r' field in " + path);
    for (double& v : rec.grasp.r) is >> v;
    if (!(is >> tok) || tok != "p")
      throw std::runtime_error("read_grasps: expected 'p' field in " + path);
    for (double& v : rec.grasp.p) is >> v;
    if (!(is >> tok) || tok != "q")
      throw std::runtime_error("read_grasps: expected 'q' field in " + path);
    while (is >> tok) {
      if (tok == "seed") {
        uint64_t v;
        is >> v;
        rec.seed = v;
      } else if (tok == "l_phys") {
        double v;
        is >> v;
        rec.l_phys = v;
      } else if (tok == "success") {
        int v;
        is >> v;
        rec.success = v;
      } else {
        rec.grasp.q.push_back(std::stod(tok));
      }
    }
    if (!is && !is.eof()) throw std::runtime_error("read_grasps: malformed line in " + path);
    out.push_back(std::move(rec));
  }
  return out;
}

std::string cloud_file(const std::string& dir, int i, bool ood) {
  std::ostringstream os;
  os << dir << "/" << (ood ? "ood_cloud_" : "cloud_") << std::setw(3) << std::setfill('0') << i
     << ".bin";
  return os.str();
}

std::string grasp_file(const std::string& dir, int i, bool ood) {
  std::ostringstream os;
  os << dir << "/" << (ood ? "ood_grasps_" : "grasps_") << std::setw(3) << std::setfill('0') << i
     << ".txt";
  return os.str();
}

// ---------------------------------------------------------------------------
// Data generation

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  while (true) {
    Vec3 v{nd(rng), nd(rng), nd(rng)};
    double n = norm(v);
    if (n > 1e-6) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  std::array<double, 4> q{nd(rng), nd(rng), nd(rng), nd(rng)};
  double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= n;
  return quat_to_matrix(q);
}

CloudRecord make_sphere_cloud(double radius, int n, std::mt19937_64& rng) {
  CloudRecord rec;
  rec.label = "sphere " + fmt(radius);
  rec.points.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec3 u = random_unit(rng);
    rec.points.push_back({radius * u[0], radius * u[1], radius * u[2]});
  }
  return rec;
}

CloudRecord make_box_cloud(const Vec3& half, int n, std::mt19937_64& rng) {
  CloudRecord rec;
  rec.label = "box " + fmt(2 * half[0]) + " " + fmt(2 * half[1]) + " " + fmt(2 * half[2]);
  double area[3] = {half[1] * half[2], half[0] * half[2], half[0] * half[1]};
  double total = area[0] + area[1] + area[2];
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  rec.points.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double pick = ud(rng) * total;
    int axis = (pick < area[0]) ? 0 : (pick < area[0] + area[1]) ? 1 : 2;
    double sign = (ud(rng) < 0.5) ? -1.0 : 1.0;
    Vec3 p;
    p[static_cast<size_t>(axis)] = sign * half[static_cast<size_t>(axis)];
    int a = (axis + 1) % 3, b = (axis + 2) % 3;
    p[static_cast<size_t>(a)] = (2 * ud(rng) - 1) * half[static_cast<size_t>(a)];
    p[static_cast<size_t>(b)] = (2 * ud(rng) - 1) * half[static_cast<size_t>(b)];
    rec.points.push_back(p);
  }
  return rec;
}

// Closes each finger's joints uniformly until its first sphere-cloud contact,
// then adds the squeeze margin (clamped to the joint limits). Returns false
// if some finger never makes contact.
bool close_fingers(const HandSpec& spec, Grasp* g, const std::vector<Vec3>& cloud,
                   double squeeze) {
  int nj = spec.joint_count();
  g->q.assign(static_cast<size_t>(nj), 0.0);
  int base = 0;
  for (const auto& finger : spec.fingers) {
    int fj = static_cast<int>(finger.joints.size());
    double q_up = finger.joints[0].q_up;
    double contact_angle = -1.0;
    for (double th = 0.0; th <= q_up + 1e-12; th += 0.01) {
      for (int j = 0; j < fj; ++j) g->q[static_cast<size_t>(base + j)] = th;
      std::vector<Sphere> spheres = forward_kinematics(spec, *g);
      size_t lo = spec.palm_spheres.size();
      for (const auto& fs : spec.fingers) {
        if (&fs == &finger) break;
        for (const auto& ls : fs.link_spheres) lo += ls.size();
      }
      size_t hi = lo;
      for (const auto& ls : finger.link_spheres) hi += ls.size();
      bool touch = false;
      for (size_t s = lo; s < hi && !touch; ++s)
        for (const auto& pt : cloud) {
          Vec3 d{pt[0] - spheres[s].center[0], pt[1] - spheres[s].center[1],
                 pt[2] - spheres[s].center[2]};
          if (norm(d) <= spheres[s].radius) {
            touch = true;
            break;
          }
        }
      if (touch) {
        contact_angle = th;
        break;
      }
    }
    if (contact_angle < 0.0) return false;
    double th = std::min(contact_angle + squeeze, q_up);
    for (int j = 0; j < fj; ++j) g->q[static_cast<size_t>(base + j)] = th;
    base += fj;
  }
  return true;
}

}  // namespace

void gen_data(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  cfg.save(cfg.out_dir + "/config.txt");
  HandSpec spec = cfg.hand();
  {
    std::ofstream hf(cfg.out_dir + "/hand.txt");
    hf << hand_spec_to_text(spec);
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> ud(0.0, 1.0);

  for (int obj = 0; obj < cfg.objects; ++obj) {
    CloudRecord cloud;
    // sized to the toy hand: the 4 cm palm span must clear the object at the
    // fully open pose and the 2 cm phalanges must be able to wrap around it
    if (obj % 2 == 0) {
      double radius = 0.007 + 0.005 * ud(rng);
      cloud = make_sphere_cloud(radius, cfg.cloud_points, rng);
    } else {
      Vec3 half{0.006 + 0.006 * ud(rng), 0.006 + 0.006 * ud(rng), 0.006 + 0.006 * ud(rng)};
      cloud = make_box_cloud(half, cfg.cloud_points, rng);
    }

    PhysContext ctx = cfg.phys(cloud.points, false);
    std::vector<GraspRecord> grasps;
    int attempts = 0;
    int max_attempts = 80 * cfg.grasps_per_object;
    int contact_failures = 0;
    while (static_cast<int>(grasps.size()) < cfg.grasps_per_object && attempts < max_attempts) {
      ++attempts;
      Vec3 u = random_unit(rng);
      double roll = 2 * M_PI * ud(rng);
      // orthonormal frame with the hand z axis pointing at the object
      Vec3 a = (std::abs(u[0]) < 0.9) ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
      Vec3 b1 = cross(u, a);
      double n1 = norm(b1);
      b1 = {b1[0] / n1, b1[1] / n1, b1[2] / n1};
      Vec3 b2 = cross(u, b1);
      Vec3 xh{std::cos(roll) * b1[0] + std::sin(roll) * b2[0],
              std::cos(roll) * b1[1] + std::sin(roll) * b2[1],
              std::cos(roll) * b1[2] + std::sin(roll) * b2[2]};
      Vec3 yh = cross(u, xh);
      Mat3 R{{{xh[0], yh[0], u[0]}, {xh[1], yh[1], u[1]}, {xh[2], yh[2], u[2]}}};

      double s_min = 1e30;
      for (const auto& pt : cloud.points) s_min = std::min(s_min, dot(pt, u));
      double gap = 0.006 + 0.006 * ud(rng);
      Grasp g;
      g.r = rot6d_encode(R);
      g.p = {u[0] * (s_min - gap), u[1] * (s_min - gap), u[2] * (s_min - gap)};

      double squeeze = 0.08 + 0.17 * ud(rng);
      if (!close_fingers(spec, &g, cloud.points, squeeze)) {
        ++contact_failures;
        continue;
      }
      SuccessReport rep = success_eval(g, cloud.points, spec, ctx);
      if (!rep.pass) continue;
      GraspRecord rec;
      rec.grasp = g;
      rec.seed = static_cast<uint64_t>(attempts - 1);
      rec.success = 1;
      grasps.push_back(std::move(rec));
    }
    if (grasps.empty()) {
      std::ostringstream os;
      os << "gen_data: no passing grasp for object " << obj << " (" << cloud.label << "): "
         << attempts << " attempts, " << contact_failures << " without finger contact";
      throw std::runtime_error(os.str());
    }

    write_cloud(cloud_file(cfg.out_dir, obj), cloud);
    write_grasps(grasp_file(cfg.out_dir, obj), grasps);

    if (cfg.ood_copy) {
      Mat3 Rt = random_rotation(rng);
      Vec3 t{0.2 * ud(rng) - 0.1, 0.2 * ud(rng) - 0.1, 0.2 * ud(rng) - 0.1};
      CloudRecord moved;
      moved.label = cloud.label;
      for (const auto& pt : cloud.points) {
        Vec3 w = mat_apply(Rt, pt);
        moved.points.push_back({w[0] + t[0], w[1] + t[1], w[2] + t[2]});
      }
      std::vector<GraspRecord> moved_grasps = grasps;
      for (auto& rec : moved_grasps) {
        Mat3 Rg = rot6d_decode(rec.grasp.r);
        rec.grasp.r = rot6d_encode(mat_mul(Rt, Rg));
        Vec3 w = mat_apply(Rt, rec.grasp.p);
        rec.grasp.p = {w[0] + t[0], w[1] + t[1], w[2] + t[2]};
      }
      write_cloud(cloud_file(cfg.out_dir, obj, true), moved);
      write_grasps(grasp_file(cfg.out_dir, obj, true), moved_grasps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training

TrainReport train(const RunConfig& cfg, const std::string& dataset_dir,
                  const std::string& ckpt_path, const std::string& curve_path) {
  std::vector<CloudRecord> clouds(static_cast<size_t>(cfg.objects));
  std::vector<TrainBatchItem> items;
  for (int i = 0; i < cfg.objects; ++i) {
    clouds[static_cast<size_t>(i)] = read_cloud(cloud_file(dataset_dir, i));
    for (const auto& rec : read_grasps(grasp_file(dataset_dir, i)))
      items.push_back({&clouds[static_cast<size_t>(i)].points, rec.grasp.flat()});
  }
  if (items.empty()) throw std::runtime_error("train: empty dataset in " + dataset_dir);

  DiffusionSchedule s = cfg.schedule();
  Denoiser model(cfg.net(), cfg.seed);
  ParamStore& params = model.params();

  std::vector<std::vector<double>> m(static_cast<size_t>(params.count()));
  std::vector<std::vector<double>> v(static_cast<size_t>(params.count()));
  for (int i = 0; i < params.count(); ++i) {
    m[static_cast<size_t>(i)].assign(params.at(i).size(), 0.0);
    v[static_cast<size_t>(i)].assign(params.at(i).size(), 0.0);
  }
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  std::ofstream curve(curve_path);
  if (!curve) throw std::runtime_error("train: cannot write " + curve_path);
  curve << std::setprecision(17);

  std::mt19937_64 rng(cfg.seed ^ 0x517cc1b727220a95ULL);
  std::uniform_int_distribution<size_t> pick(0, items.size() - 1);

  TrainReport report;
  int batch_size = std::max(1, cfg.batch);
  for (int step = 0; step < cfg.steps; ++step) {
    params.zero_grad();
    std::vector<TrainBatchItem> batch;
    for (int b = 0; b < batch_size; ++b) batch.push_back(items[pick(rng)]);
    double loss = training_loss(s, model, batch, rng, cfg.lr > 0.0);
    if (step == 0) report.initial_loss = loss;
    report.final_loss = loss;
    report.steps_run = step + 1;
    curve << step << "\t" << loss << "\n";
    if (!std::isfinite(loss) || loss > 1e3 * report.initial_loss) {
      report.diverged = true;
      break;
    }
    if (cfg.lr > 0.0) {
      double t = step + 1;
      double corr = std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
      for (int i = 0; i < params.count(); ++i) {
        Param& p = params.at(i);
        auto& mi = m[static_cast<size_t>(i)];
        auto& vi = v[static_cast<size_t>(i)];
        for (size_t j = 0; j < p.size(); ++j) {
          double g = p.grad[j];
          mi[j] = b1 * mi[j] + (1 - b1) * g;
          vi[j] = b2 * vi[j] + (1 - b2) * g * g;
          p.value[j] -= cfg.lr * corr * mi[j] / (std::sqrt(vi[j]) + eps);
        }
      }
    }
  }

  if (!report.diverged) {
    auto echo = cfg.net().echo();
    echo["T"] = std::to_string(cfg.T);
    echo["beta1"] = fmt(cfg.beta1);
    echo["betaT"] = fmt(cfg.betaT);
    model.save(ckpt_path, echo);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sampling and evaluation

std::vector<GraspRecord> sample_cmd(const RunConfig& cfg, const std::string& ckpt_path,
                                    const CloudRecord& cloud, int n, double lambda,
                                    uint64_t seed) {
  Denoiser model(cfg.net(), 0);
  auto stored = model.load(ckpt_path);
  auto expected = cfg.net().echo();
  expected["T"] = std::to_string(cfg.T);
  expected["beta1"] = fmt(cfg.beta1);
  expected["betaT"] = fmt(cfg.betaT);
  std::vector<std::string> bad;
  for (const auto& [k, val] : expected) {
    auto it = stored.find(k);
    if (it == stored.end() || it->second != val) bad.push_back(k);
  }
  if (!bad.empty()) {
    std::string msg = "sample: checkpoint/config mismatch in keys:";
    for (const auto& k : bad) msg += " " + k;
    throw std::invalid_argument(msg);
  }

  DiffusionSchedule s = cfg.schedule();
  PhysContext ctx = cfg.phys(cloud.points);
  std::optional<GuidanceConfig> guidance;
  if (lambda > 0.0) {
    guidance = cfg.guidance();
    guidance->lambda = lambda;
  }

  std::vector<GraspRecord> out;
  for (int i = 0; i < n; ++i) {
    uint64_t si = seed + static_cast<uint64_t>(i);
    std::mt19937_64 rng(si);
    SampleResult res =
        sample(s, model, cloud.points, rng, guidance, guidance ? &ctx : nullptr);
    GraspRecord rec;
    rec.grasp = res.grasp;
    rec.seed = si;
    if (guidance) rec.l_phys = phys_loss_value(res.grasp, ctx);
    out.push_back(std::move(rec));
  }
  return out;
}

EvalReport eval_cmd(const RunConfig& cfg, const std::vector<GraspRecord>& grasps,
                    const CloudRecord& cloud) {
  HandSpec spec = cfg.hand();
  PhysContext ctx = cfg.phys(cloud.points, false);
  EvalReport rep;
  rep.n = static_cast<int>(grasps.size());
  std::vector<Grasp> gs;
  int passed = 0;
  for (const auto& rec : grasps) {
    if (rec.grasp.q.size() != static_cast<size_t>(cfg.joint_dim()))
      throw std::invalid_argument("eval: grasp joint count does not match config hand");
    SuccessReport sr = success_eval(rec.grasp, cloud.points, spec, ctx);
    rep.success.push_back(sr.pass ? 1 : 0);
    rep.l_phys.push_back(phys_loss_value(rec.grasp, ctx));
    if (sr.pass) ++passed;
    gs.push_back(rec.grasp);
  }
  rep.success_rate = rep.n ? static_cast<double>(passed) / rep.n : 0.0;
  rep.diversity = (gs.size() >= 2) ? diversity_score(gs) : 0.0;
  return rep;
}

void write_eval_report(const std::string& report_path, const std::string& table_path,
                       const EvalReport& rep) {
  std::ofstream rf(report_path);
  if (!rf) throw std::runtime_error("eval: cannot write " + report_path);
  rf << std::setprecision(17);
  rf << "# grasp evaluation report\n";
  rf << "# diversity population: global over the evaluated set\n";
  rf << "n " << rep.n << "\n";
  rf << "success_rate " << rep.success_rate << "\n";
  rf << "diversity " << rep.diversity << "\n";

  std::ofstream tf(table_path);
  if (!tf) throw std::runtime_error("eval: cannot write " + table_path);
  tf << std::setprecision(17);
  tf << "index\tsuccess\tl_phys\n";
  for (int i = 0; i < rep.n; ++i)
    tf << i << "\t" << rep.success[static_cast<size_t>(i)] << "\t"
       << rep.l_phys[static_cast<size_t>(i)] << "\n";
}

}  // namespace gagrasp

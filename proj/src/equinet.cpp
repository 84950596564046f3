#include "gagrasp/equinet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gagrasp {

std::map<std::string, std::string> EquiNetConfig::echo() const {
  return {{"blocks", std::to_string(blocks)},
          {"channels", std::to_string(channels)},
          {"heads", std::to_string(heads)},
          {"downsample_m", std::to_string(downsample_m)},
          {"downsample_k", std::to_string(downsample_k)},
          {"joint_dim", std::to_string(joint_dim)},
          {"t_embed", std::to_string(t_embed)},
          {"aux_hidden", std::to_string(aux_hidden)},
          {"symmetry_breaking", symmetry_breaking ? "1" : "0"}};
}

EquiNetConfig EquiNetConfig::from_echo(const std::map<std::string, std::string>& kv) {
  EquiNetConfig c;
  auto geti = [&](const char* k, int& dst) {
    auto it = kv.find(k);
    if (it != kv.end()) dst = std::stoi(it->second);
  };
  geti("blocks", c.blocks);
  geti("channels", c.channels);
  geti("heads", c.heads);
  geti("downsample_m", c.downsample_m);
  geti("downsample_k", c.downsample_k);
  geti("joint_dim", c.joint_dim);
  geti("t_embed", c.t_embed);
  geti("aux_hidden", c.aux_hidden);
  int sb = c.symmetry_breaking ? 1 : 0;
  geti("symmetry_breaking", sb);
  c.symmetry_breaking = sb != 0;
  return c;
}

size_t Param::size() const {
  size_t n = 1;
  for (int d : dims) n *= static_cast<size_t>(d);
  return n;
}

int ParamStore::add(const std::string& name, std::vector<int> dims, std::vector<double> init) {
  Param p;
  p.name = name;
  p.dims = std::move(dims);
  p.value = std::move(init);
  if (p.value.size() != p.size()) throw std::invalid_argument("ParamStore::add: size mismatch");
  p.grad.assign(p.value.size(), 0.0);
  int id = static_cast<int>(params_.size());
  params_.push_back(std::move(p));
  index_[name] = id;
  return id;
}

Param& ParamStore::by_name(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  return params_[static_cast<size_t>(it->second)];
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

size_t ParamStore::total_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::vector<int> farthest_point_sample(const std::vector<Vec3>& pts, int m) {
  int n = static_cast<int>(pts.size());
  if (m < 1 || m > n) throw std::invalid_argument("farthest_point_sample: m out of range");
  Vec3 c{0, 0, 0};
  for (const auto& p : pts)
    for (int i = 0; i < 3; ++i) c[i] += p[i];
  for (int i = 0; i < 3; ++i) c[i] /= n;
  int seed = 0;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    Vec3 d = {pts[static_cast<size_t>(i)][0] - c[0], pts[static_cast<size_t>(i)][1] - c[1],
              pts[static_cast<size_t>(i)][2] - c[2]};
    double dd = dot(d, d);
    if (dd > best) {
      best = dd;
      seed = i;
    }
  }
  std::vector<int> sel = {seed};
  std::vector<double> mind(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec3 d = {pts[static_cast<size_t>(i)][0] - pts[static_cast<size_t>(seed)][0],
              pts[static_cast<size_t>(i)][1] - pts[static_cast<size_t>(seed)][1],
              pts[static_cast<size_t>(i)][2] - pts[static_cast<size_t>(seed)][2]};
    mind[static_cast<size_t>(i)] = dot(d, d);
  }
  while (static_cast<int>(sel.size()) < m) {
    int pick = 0;
    double best2 = -1.0;
    for (int i = 0; i < n; ++i) {
      if (mind[static_cast<size_t>(i)] > best2) {
        best2 = mind[static_cast<size_t>(i)];
        pick = i;
      }
    }
    sel.push_back(pick);
    for (int i = 0; i < n; ++i) {
      Vec3 d = {pts[static_cast<size_t>(i)][0] - pts[static_cast<size_t>(pick)][0],
                pts[static_cast<size_t>(i)][1] - pts[static_cast<size_t>(pick)][1],
                pts[static_cast<size_t>(i)][2] - pts[static_cast<size_t>(pick)][2]};
      mind[static_cast<size_t>(i)] = std::min(mind[static_cast<size_t>(i)], dot(d, d));
    }
  }
  return sel;
}

std::vector<int> k_nearest(const std::vector<Vec3>& pts, const Vec3& query, int k) {
  int n = static_cast<int>(pts.size());
  if (k < 1) throw std::invalid_argument("k_nearest: k must be >= 1");
  k = std::min(k, n);
  std::vector<std::pair<double, int>> d(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec3 v = {pts[static_cast<size_t>(i)][0] - query[0], pts[static_cast<size_t>(i)][1] - query[1],
              pts[static_cast<size_t>(i)][2] - query[2]};
    d[static_cast<size_t>(i)] = {dot(v, v), i};
  }
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<int> out(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<size_t>(i)] = d[static_cast<size_t>(i)].second;
  return out;
}

std::vector<double> sinusoidal_features(int t, int width) {
  std::vector<double> out(static_cast<size_t>(width));
  int half = width / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    out[static_cast<size_t>(2 * i)] = std::sin(t * freq);
    out[static_cast<size_t>(2 * i + 1)] = std::cos(t * freq);
  }
  return out;
}

namespace {

std::vector<double> normal_init(std::mt19937_64& rng, size_t n, double sigma) {
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

}  // namespace

Denoiser::Denoiser(const EquiNetConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.channels < 1 || cfg.heads < 1 || cfg.channels % cfg.heads != 0)
    throw std::invalid_argument("Denoiser: heads must divide channels");
  std::mt19937_64 rng(seed);
  int C = cfg.channels;
  int s_aux = cfg.joint_dim + cfg.t_embed;

  auto add_el = [&](const std::string& name, int in_ch, int out_ch) {
    double sigma = 0.5 / std::sqrt(static_cast<double>(in_ch));
    params_.add(name, {out_ch, in_ch, 9},
                normal_init(rng, static_cast<size_t>(out_ch) * in_ch * 9, sigma));
  };

  add_el("embed.lin", 4, C);
  params_.add("embed.aux_inject.W", {C, s_aux},
              normal_init(rng, static_cast<size_t>(C) * s_aux, 1.0 / std::sqrt(s_aux)));
  params_.add("embed.aux_inject.b", {C}, std::vector<double>(static_cast<size_t>(C), 0.0));

  for (int b = 0; b < cfg.blocks; ++b) {
    std::string pre = "block" + std::to_string(b) + ".";
    add_el(pre + "attn.q", C, C);
    add_el(pre + "attn.k", C, C);
    add_el(pre + "attn.v", C, C);
    add_el(pre + "attn.out", C, C);
    add_el(pre + "bil.a", C, C);
    add_el(pre + "bil.b", C, C);
    add_el(pre + "bil.zref", 1, C);
    add_el(pre + "bil.out", 2 * C, C);
    add_el(pre + "mlp.out", C, C);
  }
  add_el("readout", C, 3);

  int H = cfg.aux_hidden, K = cfg.joint_dim;
  params_.add("aux.W1", {H, s_aux},
              normal_init(rng, static_cast<size_t>(H) * s_aux, 1.0 / std::sqrt(s_aux)));
  params_.add("aux.b1", {H}, std::vector<double>(static_cast<size_t>(H), 0.0));
  params_.add("aux.W2", {K, H},
              normal_init(rng, static_cast<size_t>(K) * H, 1.0 / std::sqrt(H)));
  params_.add("aux.b2", {K}, std::vector<double>(static_cast<size_t>(K), 0.0));
}

Denoiser::Binding Denoiser::bind(Tape& tape) const {
  Binding b;
  for (int i = 0; i < params_.count(); ++i) {
    const Param& p = params_.at(i);
    TapeShape sh;
    if (p.dims.size() == 3)
      sh = {p.dims[0], p.dims[1], p.dims[2]};
    else if (p.dims.size() == 2)
      sh = {p.dims[0], p.dims[1], 1};
    else
      sh = {1, p.dims[0], 1};
    b.slots.push_back(tape.leaf(sh, p.value));
  }
  return b;
}

void Denoiser::accumulate_grads(Tape& tape, const Binding& binding) {
  for (int i = 0; i < params_.count(); ++i) {
    Param& p = params_.at(i);
    const double* g = tape.grad(binding.slots[static_cast<size_t>(i)]);
    for (size_t j = 0; j < p.value.size(); ++j) p.grad[j] += g[j];
  }
}

int Denoiser::forward(Tape& tape, const Binding& binding, const std::vector<Vec3>& cloud,
                      const std::vector<double>& g_flat, int t_step, double p_scale) const {
  if (cloud.empty()) throw std::invalid_argument("Denoiser::forward: empty point cloud");
  int K = cfg_.joint_dim;
  if (g_flat.size() != static_cast<size_t>(9 + K))
    throw std::invalid_argument("Denoiser::forward: grasp vector length mismatch");
  int C = cfg_.channels;
  int n_obj = static_cast<int>(cloud.size());
  int T0 = n_obj + 1;

  auto slot = [&](const char* name) {
    // params are registered in a fixed order; locate by manifest name
    for (int i = 0; i < params_.count(); ++i)
      if (params_.at(i).name == name) return binding.slots[static_cast<size_t>(i)];
    throw std::invalid_argument(std::string("Denoiser::forward: no param ") + name);
  };

  // input tokens: one point trivector per object point; grasp token carries
  // the translation point, the two rotation-column directions, and the
  // symmetry-breaking pseudoscalar channel
  std::vector<double> x0(static_cast<size_t>(T0) * 4 * 16, 0.0);
  for (int i = 0; i < n_obj; ++i) {
    Multivector m = embed_point(cloud[static_cast<size_t>(i)]);
    std::copy(m.c.begin(), m.c.end(), x0.begin() + (static_cast<size_t>(i) * 4 + 0) * 16);
  }
  {
    size_t base = static_cast<size_t>(n_obj) * 4 * 16;
    Multivector pm = embed_point(
        {g_flat[6] * p_scale, g_flat[7] * p_scale, g_flat[8] * p_scale});
    Multivector d1 = embed_direction({g_flat[0], g_flat[1], g_flat[2]});
    Multivector d2 = embed_direction({g_flat[3], g_flat[4], g_flat[5]});
    std::copy(pm.c.begin(), pm.c.end(), x0.begin() + base);
    std::copy(d1.c.begin(), d1.c.end(), x0.begin() + base + 16);
    std::copy(d2.c.begin(), d2.c.end(), x0.begin() + base + 32);
    if (cfg_.symmetry_breaking) {
      // orientation cue: a normalized triple product of the rotation-column
      // bivector axis with a cubic moment of the cloud. It is invariant under
      // rotations and translations but changes sign under reflections, which
      // is what allows the network to distinguish mirror-image scenes.
      Vec3 c{0, 0, 0};
      for (const auto& p : cloud)
        for (int i = 0; i < 3; ++i) c[i] += p[i];
      for (int i = 0; i < 3; ++i) c[i] /= static_cast<double>(n_obj);
      Vec3 m{0, 0, 0};
      for (const auto& p : cloud) {
        Vec3 d = {p[0] - c[0], p[1] - c[1], p[2] - c[2]};
        double w = dot(d, d);
        for (int i = 0; i < 3; ++i) m[i] += w * d[i];
      }
      Vec3 n = cross({g_flat[0], g_flat[1], g_flat[2]}, {g_flat[3], g_flat[4], g_flat[5]});
      double denom = norm(n) * norm(m);
      double chi = denom > 0.0 ? dot(n, m) / denom : 0.0;
      x0[base + 48 + kE0123] = chi;
    }
  }
  int x0_id = tape.leaf(TapeShape{T0, 4, 16}, x0);

  int s_aux = K + cfg_.t_embed;
  std::vector<double> aux(static_cast<size_t>(s_aux));
  for (int j = 0; j < K; ++j) aux[static_cast<size_t>(j)] = g_flat[static_cast<size_t>(9 + j)];
  auto temb = sinusoidal_features(t_step, cfg_.t_embed);
  std::copy(temb.begin(), temb.end(), aux.begin() + K);
  int aux_id = tape.leaf(TapeShape{1, s_aux, 1}, aux);

  int x = op_equi_linear(tape, x0_id, slot("embed.lin"), 4, C);
  int aux_proj = op_dense(tape, aux_id, slot("embed.aux_inject.W"), slot("embed.aux_inject.b"),
                          s_aux, C);
  int grasp_tok = n_obj;
  x = op_inject_scalar(tape, x, aux_proj, grasp_tok);

  std::vector<Vec3> positions = cloud;

  for (int b = 0; b < cfg_.blocks; ++b) {
    std::string pre = "block" + std::to_string(b) + ".";
    int h = op_equi_layernorm(tape, x);
    int q = op_equi_linear(tape, h, slot((pre + "attn.q").c_str()), C, C);
    int k = op_equi_linear(tape, h, slot((pre + "attn.k").c_str()), C, C);
    int v = op_equi_linear(tape, h, slot((pre + "attn.v").c_str()), C, C);
    int a = op_equi_attention(tape, q, k, v, cfg_.heads);
    x = op_add(tape, x, op_equi_linear(tape, a, slot((pre + "attn.out").c_str()), C, C));

    if (b == 0 && cfg_.downsample_m < static_cast<int>(positions.size())) {
      int n_now = static_cast<int>(positions.size());
      std::vector<int> fps = farthest_point_sample(positions, cfg_.downsample_m);
      // mean pooling over the kNN neighborhood of each FPS center. A mean is
      // indifferent to both the neighbor order and the input point order,
      // which keeps the network permutation-invariant over the cloud.
      int kk = std::min(cfg_.downsample_k, n_now);
      std::vector<std::vector<int>> nbrs(static_cast<size_t>(cfg_.downsample_m));
      for (int m = 0; m < cfg_.downsample_m; ++m)
        nbrs[static_cast<size_t>(m)] = k_nearest(
            positions, positions[static_cast<size_t>(fps[static_cast<size_t>(m)])], kk);
      int pooled = -1;
      for (int j = 0; j < kk; ++j) {
        std::vector<int> idx(static_cast<size_t>(cfg_.downsample_m + 1) * C);
        for (int m = 0; m < cfg_.downsample_m; ++m)
          for (int c = 0; c < C; ++c)
            idx[static_cast<size_t>(m) * C + c] = nbrs[static_cast<size_t>(m)][static_cast<size_t>(j)];
        for (int c = 0; c < C; ++c)
          idx[static_cast<size_t>(cfg_.downsample_m) * C + c] = n_now;  // keep grasp token
        int sel = op_select_tokens(tape, x, idx, cfg_.downsample_m + 1);
        pooled = (pooled < 0) ? sel : op_add(tape, pooled, sel);
      }
      x = op_scale(tape, pooled, 1.0 / kk);
      std::vector<Vec3> np(static_cast<size_t>(cfg_.downsample_m));
      for (int m = 0; m < cfg_.downsample_m; ++m)
        np[static_cast<size_t>(m)] = positions[static_cast<size_t>(fps[static_cast<size_t>(m)])];
      positions = std::move(np);
      grasp_tok = cfg_.downsample_m;
    }

    int h2 = op_equi_layernorm(tape, x);
    int zref = op_equi_linear(tape, op_mean_channels(tape, h2), slot((pre + "bil.zref").c_str()), 1, C);
    int y1 = op_equi_linear(tape, h2, slot((pre + "bil.a").c_str()), C, C);
    int y2 = op_equi_linear(tape, h2, slot((pre + "bil.b").c_str()), C, C);
    int gp = op_geometric_product(tape, y1, y2);
    int jn = op_join_scaled(tape, y1, y2, zref);
    int bil = op_concat_channels(tape, gp, jn);
    int red = op_equi_linear(tape, bil, slot((pre + "bil.out").c_str()), 2 * C, C);
    int act = op_gated_gelu(tape, red);
    x = op_add(tape, x, op_equi_linear(tape, act, slot((pre + "mlp.out").c_str()), C, C));
  }

  int hf = op_equi_layernorm(tape, x);
  int rd = op_equi_linear(tape, hf, slot("readout"), C, 3);
  // left-multiply by e0 to project onto ideal blades; the read directions
  // then transform as directions (no translation leak through e123)
  int T_rd = tape.at(rd).shape.tokens;
  std::vector<double> e0c(static_cast<size_t>(T_rd) * 3 * 16, 0.0);
  for (int i = 0; i < T_rd * 3; ++i) e0c[static_cast<size_t>(i) * 16 + kE0] = 1.0;
  int e0t = tape.leaf(TapeShape{T_rd, 3, 16}, e0c);
  int ideal = op_geometric_product(tape, e0t, rd);
  int eps9 = op_read_directions(tape, ideal, grasp_tok, {0, 1, 2});

  int ah = op_gelu(tape, op_dense(tape, aux_id, slot("aux.W1"), slot("aux.b1"), s_aux, cfg_.aux_hidden));
  int aq = op_dense(tape, ah, slot("aux.W2"), slot("aux.b2"), cfg_.aux_hidden, K);
  return op_concat_channels(tape, eps9, aq);
}

std::vector<double> Denoiser::eps(const std::vector<Vec3>& cloud, const std::vector<double>& g_flat,
                                  int t_step, double p_scale) const {
  Tape tape;
  Binding b = bind(tape);
  int out = forward(tape, b, cloud, g_flat, t_step, p_scale);
  const double* v = tape.val(out);
  return std::vector<double>(v, v + tape.at(out).shape.size());
}

void Denoiser::save(const std::string& path,
                    const std::map<std::string, std::string>& config_echo) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint save: cannot open " + path);
  os << "gagrasp-checkpoint v1\n";
  auto echo = cfg_.echo();
  for (const auto& [k, v] : config_echo) echo[k] = v;
  os << "config " << echo.size() << "\n";
  for (const auto& [k, v] : echo) os << k << " = " << v << "\n";
  os << "manifest " << params_.count() << "\n";
  for (int i = 0; i < params_.count(); ++i) {
    const Param& p = params_.at(i);
    os << p.name;
    for (int d : p.dims) os << " " << d;
    os << "\n";
  }
  os << "DATA\n";
  for (int i = 0; i < params_.count(); ++i) {
    const Param& p = params_.at(i);
    os.write(reinterpret_cast<const char*>(p.value.data()),
             static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
}

std::map<std::string, std::string> Denoiser::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint load: cannot open " + path);
  std::string line;
  std::getline(is, line);
  if (line != "gagrasp-checkpoint v1")
    throw std::runtime_error("checkpoint load: bad header in " + path);
  std::getline(is, line);
  std::istringstream hs(line);
  std::string tok;
  size_t n_cfg;
  hs >> tok >> n_cfg;
  std::map<std::string, std::string> echo;
  for (size_t i = 0; i < n_cfg; ++i) {
    std::getline(is, line);
    auto eq = line.find(" = ");
    if (eq == std::string::npos) throw std::runtime_error("checkpoint load: bad config line");
    echo[line.substr(0, eq)] = line.substr(eq + 3);
  }
  std::getline(is, line);
  std::istringstream ms(line);
  int n_params;
  ms >> tok >> n_params;
  if (n_params != params_.count())
    throw std::runtime_error("checkpoint load: parameter count mismatch");
  for (int i = 0; i < n_params; ++i) {
    std::getline(is, line);
    std::istringstream ps(line);
    std::string name;
    ps >> name;
    if (name != params_.at(i).name)
      throw std::runtime_error("checkpoint load: manifest mismatch at " + name);
  }
  std::getline(is, line);
  if (line != "DATA") throw std::runtime_error("checkpoint load: missing DATA marker");
  for (int i = 0; i < params_.count(); ++i) {
    Param& p = params_.at(i);
    is.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("checkpoint load: truncated payload");
  return echo;
}

}  // namespace gagrasp

#include "gagrasp/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "gagrasp/embed.hpp"
#include "gagrasp/multivector.hpp"
#include "gagrasp/ops.hpp"

namespace gagrasp {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

template <typename F>
SuiteResult timed(const std::string& name, F&& body) {
  SuiteResult r;
  r.name = name;
  double t0 = now_seconds();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.ok = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = now_seconds() - t0;
  return r;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = std::max({max_abs(a), max_abs(b), 1e-12});
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m / scale;
}

std::vector<double> random_vec(std::mt19937_64& rng, size_t n) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

// Blade factor lists in the fixed coefficient order.
const std::vector<std::vector<int>>& blade_factors() {
  static const std::vector<std::vector<int>> f = {
      {},        {0},       {1},       {2},       {3},       {0, 1},
      {0, 2},    {0, 3},    {1, 2},    {1, 3},    {2, 3},    {0, 1, 2},
      {0, 1, 3}, {0, 2, 3}, {1, 2, 3}, {0, 1, 2, 3}};
  return f;
}

}  // namespace

OracleProduct oracle_basis_product(int a, int b) {
  std::vector<int> seq = blade_factors()[static_cast<size_t>(a)];
  const auto& fb = blade_factors()[static_cast<size_t>(b)];
  seq.insert(seq.end(), fb.begin(), fb.end());

  int swaps = 0;
  for (size_t i = 0; i + 1 < seq.size(); ++i)
    for (size_t j = 0; j + 1 < seq.size() - i; ++j)
      if (seq[j] > seq[j + 1]) {
        std::swap(seq[j], seq[j + 1]);
        ++swaps;
      }

  std::vector<int> reduced;
  for (size_t i = 0; i < seq.size();) {
    if (i + 1 < seq.size() && seq[i] == seq[i + 1]) {
      if (seq[i] == 0) return {};  // e0 e0 = 0
      i += 2;                      // e_k e_k = 1
    } else {
      reduced.push_back(seq[i]);
      ++i;
    }
  }

  for (size_t idx = 0; idx < blade_factors().size(); ++idx)
    if (blade_factors()[idx] == reduced)
      return {static_cast<int>(idx), (swaps % 2 == 0) ? 1.0 : -1.0};
  throw std::logic_error("oracle_basis_product: unmatched factor list");
}

RigidAction random_motor_action(std::mt19937_64& rng, double t_scale) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  Vec3 axis{nd(rng), nd(rng), nd(rng)};
  double n = norm(axis);
  axis = {axis[0] / n, axis[1] / n, axis[2] / n};
  double angle = 2 * M_PI * ud(rng) - M_PI;
  Vec3 t{t_scale * nd(rng), t_scale * nd(rng), t_scale * nd(rng)};
  RigidAction act;
  act.u = Versor::translator(t) * Versor::rotor(axis, angle);
  act.R = axis_angle_to_matrix(axis, angle);
  act.t = t;
  return act;
}

std::vector<double> act_mv_tensor(const Versor& u, const std::vector<double>& x) {
  if (x.size() % 16 != 0) throw std::invalid_argument("act_mv_tensor: size not multiple of 16");
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); i += 16) {
    Multivector m;
    std::copy(x.begin() + static_cast<long>(i), x.begin() + static_cast<long>(i) + 16,
              m.c.begin());
    Multivector r = u(m);
    std::copy(r.c.begin(), r.c.end(), out.begin() + static_cast<long>(i));
  }
  return out;
}

std::vector<Vec3> act_cloud(const Mat3& R, const Vec3& t, const std::vector<Vec3>& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) {
    Vec3 w = mat_apply(R, p);
    out.push_back({w[0] + t[0], w[1] + t[1], w[2] + t[2]});
  }
  return out;
}

std::vector<double> act_flat_grasp(const Mat3& R, const Vec3& t, double trans_scale,
                                   const std::vector<double>& g) {
  std::vector<double> out = g;
  for (int c = 0; c < 2; ++c) {
    Vec3 col{g[static_cast<size_t>(3 * c)], g[static_cast<size_t>(3 * c + 1)],
             g[static_cast<size_t>(3 * c + 2)]};
    Vec3 w = mat_apply(R, col);
    for (int i = 0; i < 3; ++i) out[static_cast<size_t>(3 * c + i)] = w[static_cast<size_t>(i)];
  }
  Vec3 p{g[6], g[7], g[8]};
  Vec3 w = mat_apply(R, p);
  for (int i = 0; i < 3; ++i)
    out[static_cast<size_t>(6 + i)] = w[static_cast<size_t>(i)] + trans_scale * t[static_cast<size_t>(i)];
  return out;
}

std::vector<double> act_eps(const Mat3& R, const std::vector<double>& eps) {
  std::vector<double> out = eps;
  for (int c = 0; c < 3; ++c) {
    Vec3 v{eps[static_cast<size_t>(3 * c)], eps[static_cast<size_t>(3 * c + 1)],
           eps[static_cast<size_t>(3 * c + 2)]};
    Vec3 w = mat_apply(R, v);
    for (int i = 0; i < 3; ++i) out[static_cast<size_t>(3 * c + i)] = w[static_cast<size_t>(i)];
  }
  return out;
}

NoiseStream act_noise_stream(const Mat3& R, const Vec3& t, double gT_trans_scale,
                             const NoiseStream& ns) {
  NoiseStream out;
  out.g_T = act_flat_grasp(R, t, gT_trans_scale, ns.g_T);
  for (const auto& z : ns.z) out.z.push_back(act_eps(R, z));
  return out;
}

// ---------------------------------------------------------------------------
// Algebra suites

SuiteResult suite_cayley() {
  return timed("cayley-table-oracle", [](SuiteResult& r) {
    int mismatches = 0;
    for (int a = 0; a < 16; ++a)
      for (int b = 0; b < 16; ++b) {
        OracleProduct o = oracle_basis_product(a, b);
        Multivector p = Multivector::blade(a) * Multivector::blade(b);
        for (int i = 0; i < 16; ++i) {
          double want = (o.blade == i) ? o.sign : 0.0;
          if (p[i] != want) ++mismatches;
        }
      }
    r.ok = mismatches == 0;
    r.detail = "mismatched coefficients: " + std::to_string(mismatches) + "/4096";
  });
}

SuiteResult suite_tampered_cayley() {
  return timed("tampered-cayley-control", [](SuiteResult& r) {
    // negative control: a deliberately sign-flipped product table entry must
    // be caught by the same oracle comparison
    int mismatches = 0;
    for (int a = 0; a < 16; ++a)
      for (int b = 0; b < 16; ++b) {
        OracleProduct o = oracle_basis_product(a, b);
        Multivector p = Multivector::blade(a) * Multivector::blade(b);
        if (a == kE1 && b == kE2) p = p * -1.0;
        for (int i = 0; i < 16; ++i) {
          double want = (o.blade == i) ? o.sign : 0.0;
          if (p[i] != want) ++mismatches;
        }
      }
    r.ok = mismatches > 0;
    r.detail = "tampering detected at " + std::to_string(mismatches) + " coefficients";
  });
}

SuiteResult suite_dual_join() {
  return timed("dual-join-blades", [](SuiteResult& r) {
    int bad = 0;
    for (int i = 0; i < 16; ++i) {
      Multivector x = Multivector::blade(i);
      Multivector w = wedge(x, dual(x));
      for (int j = 0; j < 16; ++j) {
        double want = (j == kE0123) ? 1.0 : 0.0;
        if (w[j] != want) ++bad;
      }
      // dual is an involution up to sign: dual(dual(x)) = +-x
      Multivector dd = dual(dual(x));
      bool plus = true, minus = true;
      for (int j = 0; j < 16; ++j) {
        if (dd[j] != x[j]) plus = false;
        if (dd[j] != -x[j]) minus = false;
      }
      if (!plus && !minus) ++bad;
    }
    // oracle complement: the unique blade and sign with e_i ^ rc(e_i) = +e0123
    auto oracle_dual_blade = [](int i) {
      std::vector<int> comp;
      for (int f = 0; f < 4; ++f) {
        bool has = false;
        for (int x : blade_factors()[static_cast<size_t>(i)]) has = has || x == f;
        if (!has) comp.push_back(f);
      }
      int c = -1;
      for (size_t idx = 0; idx < blade_factors().size(); ++idx)
        if (blade_factors()[idx] == comp) c = static_cast<int>(idx);
      OracleProduct o = oracle_basis_product(i, c);  // disjoint, so product = wedge
      return std::pair<int, double>{c, o.sign};
    };
    auto oracle_dual = [&](const Multivector& x) {
      Multivector out;
      for (int i = 0; i < 16; ++i) {
        auto [c, s] = oracle_dual_blade(i);
        out[c] += s * x[i];
      }
      return out;
    };
    auto oracle_wedge = [](const Multivector& a, const Multivector& b) {
      Multivector out;
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
          OracleProduct o = oracle_basis_product(i, j);
          if (o.blade < 0) continue;
          int grade_sum = static_cast<int>(blade_factors()[static_cast<size_t>(i)].size() +
                                           blade_factors()[static_cast<size_t>(j)].size());
          if (static_cast<int>(blade_factors()[static_cast<size_t>(o.blade)].size()) !=
              grade_sum)
            continue;
          out[o.blade] += o.sign * a[i] * b[j];
        }
      return out;
    };

    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 50; ++rep) {
      Multivector a, b;
      for (int j = 0; j < 16; ++j) {
        a[j] = random_vec(rng, 1)[0];
        b[j] = random_vec(rng, 1)[0];
      }
      Multivector da = dual(a);
      Multivector oda = oracle_dual(a);
      std::vector<double> dv(da.c.begin(), da.c.end()), odv(oda.c.begin(), oda.c.end());
      if (rel_err(dv, odv) > 1e-12) ++bad;
      // join per its definition, rebuilt entirely from the oracle pieces
      Multivector lhs = join(a, b);
      Multivector rhs = oracle_dual(oracle_wedge(oracle_dual(a), oracle_dual(b)));
      std::vector<double> lv(lhs.c.begin(), lhs.c.end()), rv(rhs.c.begin(), rhs.c.end());
      if (rel_err(lv, rv) > 1e-12) ++bad;
    }
    r.ok = bad == 0;
    r.detail = "violations: " + std::to_string(bad);
  });
}

// ---------------------------------------------------------------------------
// Layer equivariance

namespace {

// Measures max relative commutation error of a tape-recorded layer under u.
double layer_err(const std::function<int(Tape&, int)>& build, int tokens, int channels,
                 const Versor& u, std::mt19937_64& rng) {
  std::vector<double> x0 =
      random_vec(rng, static_cast<size_t>(tokens) * static_cast<size_t>(channels) * 16);
  TapeShape sh{tokens, channels, 16};

  Tape t1;
  int y1 = build(t1, t1.leaf(sh, x0));
  std::vector<double> out1(t1.val(y1), t1.val(y1) + t1.at(y1).shape.size());

  Tape t2;
  int y2 = build(t2, t2.leaf(sh, act_mv_tensor(u, x0)));
  std::vector<double> out2(t2.val(y2), t2.val(y2) + t2.at(y2).shape.size());

  return rel_err(act_mv_tensor(u, out1), out2);
}

}  // namespace

SuiteResult suite_layer_equivariance(int n_motors, double tol) {
  return timed("layer-equivariance", [&](SuiteResult& r) {
    std::mt19937_64 rng(11);
    const int T = 5, C = 3;
    std::vector<double> w_lin = random_vec(rng, static_cast<size_t>(C) * C * 9);
    std::vector<double> w_z = random_vec(rng, static_cast<size_t>(C) * 1 * 9);
    TapeShape wsh{C, C, 9};
    TapeShape wzsh{C, 1, 9};

    struct Layer {
      const char* name;
      std::function<int(Tape&, int)> build;
    };
    std::vector<Layer> layers;
    layers.push_back({"equi_linear", [&](Tape& t, int x) {
                        return op_equi_linear(t, x, t.leaf(wsh, w_lin), C, C);
                      }});
    layers.push_back({"geometric_bilinear", [&](Tape& t, int x) {
                        int zref = op_equi_linear(t, op_mean_channels(t, x),
                                                  t.leaf(wzsh, w_z), 1, C);
                        int gp = op_geometric_product(t, x, x);
                        int jn = op_join_scaled(t, x, x, zref);
                        return op_concat_channels(t, gp, jn);
                      }});
    layers.push_back({"equi_attention", [&](Tape& t, int x) {
                        return op_equi_attention(t, x, x, x, 1);
                      }});
    layers.push_back({"equi_layernorm", [&](Tape& t, int x) {
                        return op_equi_layernorm(t, x);
                      }});
    layers.push_back({"gated_gelu", [&](Tape& t, int x) { return op_gated_gelu(t, x); }});

    double worst = 0.0;
    std::string worst_name = "none";
    for (int m = 0; m < n_motors; ++m) {
      RigidAction act = random_motor_action(rng);
      for (const auto& layer : layers) {
        double e = layer_err(layer.build, T, C, act.u, rng);
        if (e > worst) {
          worst = e;
          worst_name = layer.name;
        }
      }
    }
    r.ok = worst < tol;
    r.detail = "worst " + worst_name + " err=" + fmt(worst) + " tol=" + fmt(tol);
  });
}

SuiteResult suite_denoiser_equivariance(int n_motors, double tol) {
  return timed("denoiser-equivariance", [&](SuiteResult& r) {
    EquiNetConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 4;
    cfg.heads = 2;
    cfg.downsample_m = 6;
    cfg.downsample_k = 4;
    cfg.joint_dim = 4;
    Denoiser model(cfg, 3);

    std::mt19937_64 rng(13);
    std::vector<Vec3> cloud;
    for (int i = 0; i < 14; ++i) {
      auto v = random_vec(rng, 3);
      cloud.push_back({0.05 * v[0], 0.05 * v[1], 0.05 * v[2]});
    }
    std::vector<double> g = random_vec(rng, 13);
    int t_step = 37;
    double p_scale = 2.5;

    double worst = 0.0;
    double worst_q = 0.0;
    for (int m = 0; m < n_motors; ++m) {
      RigidAction act = random_motor_action(rng);
      std::vector<double> e1 = model.eps(cloud, g, t_step, p_scale);
      std::vector<double> e2 = model.eps(act_cloud(act.R, act.t, cloud),
                                         act_flat_grasp(act.R, act.t, 1.0 / p_scale, g),
                                         t_step, p_scale);
      worst = std::max(worst, rel_err(act_eps(act.R, e1), e2));
      for (int j = 9; j < 13; ++j)
        worst_q = std::max(worst_q,
                           std::abs(e1[static_cast<size_t>(j)] - e2[static_cast<size_t>(j)]));
    }
    r.ok = worst < tol && worst_q == 0.0;
    r.detail = "err=" + fmt(worst) + " tol=" + fmt(tol) +
               " joint_drift=" + fmt(worst_q) + " (must be 0)";
  });
}

SuiteResult suite_reflection_symmetry_breaking() {
  return timed("reflection-symmetry-breaking", [](SuiteResult& r) {
    Versor mirror = Versor::reflection({0, 0, 1}, 0.0);
    Mat3 M = mat_identity();
    M[2][2] = -1.0;

    std::mt19937_64 rng(17);
    std::vector<Vec3> cloud;
    for (int i = 0; i < 12; ++i) {
      auto v = random_vec(rng, 3);
      cloud.push_back({0.05 * v[0], 0.05 * v[1], 0.05 * v[2]});
    }
    std::vector<double> g = random_vec(rng, 13);

    // error over the direction components only; the joint head is invariant
    // by construction and its magnitude would otherwise mask the signal
    double drift_q = 0.0;
    auto reflect_err = [&](bool breaking) {
      EquiNetConfig cfg;
      cfg.blocks = 2;
      cfg.channels = 4;
      cfg.heads = 2;
      cfg.downsample_m = 6;
      cfg.downsample_k = 4;
      cfg.joint_dim = 4;
      cfg.symmetry_breaking = breaking;
      Denoiser model(cfg, 5);
      std::vector<double> e1 = model.eps(cloud, g, 21, 1.0);
      std::vector<double> e2 =
          model.eps(act_cloud(M, {0, 0, 0}, cloud), act_flat_grasp(M, {0, 0, 0}, 1.0, g), 21, 1.0);
      std::vector<double> a1 = act_eps(M, e1);
      double scale = 1e-12, diff = 0.0;
      for (size_t i = 0; i < 9; ++i) {
        scale = std::max({scale, std::abs(a1[i]), std::abs(e2[i])});
        diff = std::max(diff, std::abs(a1[i] - e2[i]));
      }
      for (size_t i = 9; i < a1.size(); ++i) drift_q = std::max(drift_q, std::abs(a1[i] - e2[i]));
      return diff / scale;
    };

    double err_on = reflect_err(true);
    double err_off = reflect_err(false);
    // the orientation cue is designed to break reflections; without it the
    // same network must commute with the mirror up to the small even-parity
    // leakage of the weight-normalized point embedding
    bool designed_break = err_on > 1e-3;
    bool clean_without = err_off < 1e-6 && drift_q == 0.0;
    r.ok = designed_break && clean_without;
    r.expected_failure = designed_break;
    r.detail = "err(symmetry_breaking on)=" + fmt(err_on) +
               " err(off)=" + fmt(err_off) + " joint_drift=" + fmt(drift_q);
  });
}

// ---------------------------------------------------------------------------
// Gradient suites

namespace {

struct GradCase {
  std::string name;
  std::vector<TapeShape> shapes;
  // builds the scalar loss from the leaf ids
  std::function<int(Tape&, const std::vector<int>&)> build;
};

double run_grad_case(const GradCase& gc, std::mt19937_64& rng, double step) {
  size_t total = 0;
  for (const auto& sh : gc.shapes) total += sh.size();
  std::vector<double> x0 = random_vec(rng, total);

  auto f = [&](std::span<const double> x, std::span<double> grad) {
    Tape t;
    std::vector<int> ids;
    size_t off = 0;
    for (const auto& sh : gc.shapes) {
      ids.push_back(t.leaf(sh, std::span<const double>(x.data() + off, sh.size())));
      off += sh.size();
    }
    int loss = gc.build(t, ids);
    if (!grad.empty()) {
      double seed = 1.0;
      t.backward(loss, std::span<const double>(&seed, 1));
      off = 0;
      for (size_t i = 0; i < ids.size(); ++i) {
        const double* g = t.grad(ids[i]);
        std::copy(g, g + gc.shapes[i].size(), grad.data() + off);
        off += gc.shapes[i].size();
      }
    }
    return t.val(loss)[0];
  };
  return grad_check(f, x0, step);
}

}  // namespace

SuiteResult suite_gradient_primitives(double step, double tol) {
  return timed("gradient-primitives", [&](SuiteResult& r) {
    std::mt19937_64 rng(19);
    const int T = 3, C = 2;
    TapeShape mv{T, C, 16};
    TapeShape sc{1, 5, 1};
    std::vector<double> ref = random_vec(rng, 2 * mv.size());  // covers concat outputs
    std::vector<double> ref_sc = random_vec(rng, sc.size());
    auto mse = [ref](Tape& t, int out) {
      return op_mse(t, out, std::span<const double>(ref.data(), t.at(out).shape.size()));
    };

    std::vector<GradCase> cases;
    cases.push_back({"add", {mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_add(t, in[0], in[1]));
                     }});
    cases.push_back({"sub", {mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_sub(t, in[0], in[1]));
                     }});
    cases.push_back({"scale", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_scale(t, in[0], 1.7));
                     }});
    cases.push_back({"mul", {mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_mul(t, in[0], in[1]));
                     }});
    cases.push_back({"geometric_product", {mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_geometric_product(t, in[0], in[1]));
                     }});
    cases.push_back({"join_scaled", {mv, mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_join_scaled(t, in[0], in[1], in[2]));
                     }});
    cases.push_back({"equi_linear", {mv, TapeShape{C, C, 9}},
                     [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_equi_linear(t, in[0], in[1], C, C));
                     }});
    cases.push_back({"equi_attention", {mv, mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_equi_attention(t, in[0], in[1], in[2], 2));
                     }});
    cases.push_back({"gated_gelu", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_gated_gelu(t, in[0]));
                     }});
    cases.push_back({"equi_layernorm", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_equi_layernorm(t, in[0]));
                     }});
    cases.push_back({"mean_channels", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_mean_channels(t, in[0]));
                     }});
    cases.push_back({"concat_channels", {mv, mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_concat_channels(t, in[0], in[1]));
                     }});
    cases.push_back({"select_tokens", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       std::vector<int> idx = {2, 0, 1, 2};  // 2 tokens x C channels
                       return mse(t, op_select_tokens(t, in[0], idx, 2));
                     }});
    cases.push_back({"inject_scalar", {mv, TapeShape{1, C, 1}},
                     [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_inject_scalar(t, in[0], in[1], 1));
                     }});
    cases.push_back({"dense", {sc, TapeShape{3, 5, 1}, TapeShape{1, 3, 1}},
                     [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_dense(t, in[0], in[1], in[2], 5, 3));
                     }});
    cases.push_back({"gelu", {sc}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_gelu(t, in[0]));
                     }});
    cases.push_back({"read_directions", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       return mse(t, op_read_directions(t, in[0], 1, {0, 1}));
                     }});
    cases.push_back({"sum", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       int s = op_sum(t, in[0]);
                       return op_mse(t, s, std::span<const double>(ref_sc.data(), 1));
                     }});
    cases.push_back({"mse", {mv}, [&](Tape& t, const std::vector<int>& in) {
                       return op_mse(t, in[0], std::span<const double>(ref.data(), mv.size()));
                     }});

    double worst = 0.0;
    std::string worst_name = "none";
    for (const auto& gc : cases) {
      double e;
      try {
        e = run_grad_case(gc, rng, step);
      } catch (const std::exception& ex) {
        throw std::runtime_error(gc.name + ": " + ex.what());
      }
      if (e > worst) {
        worst = e;
        worst_name = gc.name;
      }
    }
    r.ok = worst < tol;
    r.detail = "worst " + worst_name + " err=" + fmt(worst) + " tol=" + fmt(tol);
  });
}

SuiteResult suite_gradient_training_loss(double step, double tol) {
  return timed("gradient-training-loss", [&](SuiteResult& r) {
    EquiNetConfig cfg;
    cfg.blocks = 1;
    cfg.channels = 4;
    cfg.heads = 2;
    cfg.downsample_m = 4;
    cfg.downsample_k = 3;
    cfg.joint_dim = 2;
    cfg.aux_hidden = 6;
    Denoiser model(cfg, 23);

    std::mt19937_64 rng(29);
    std::vector<Vec3> cloud;
    for (int i = 0; i < 8; ++i) {
      auto v = random_vec(rng, 3);
      cloud.push_back({0.05 * v[0], 0.05 * v[1], 0.05 * v[2]});
    }
    std::vector<double> g_t = random_vec(rng, 11);
    std::vector<double> eps_ref = random_vec(rng, 11);
    int t_step = 13;
    double p_scale = 1.8;

    ParamStore& params = model.params();
    std::vector<double> x0;
    for (int i = 0; i < params.count(); ++i)
      x0.insert(x0.end(), params.at(i).value.begin(), params.at(i).value.end());

    auto f = [&](std::span<const double> x, std::span<double> grad) {
      size_t off = 0;
      for (int i = 0; i < params.count(); ++i) {
        Param& p = params.at(i);
        std::copy(x.begin() + static_cast<long>(off),
                  x.begin() + static_cast<long>(off + p.size()), p.value.begin());
        off += p.size();
      }
      params.zero_grad();
      Tape tape;
      Denoiser::Binding bind = model.bind(tape);
      int out = model.forward(tape, bind, cloud, g_t, t_step, p_scale);
      int loss = op_mse(tape, out, eps_ref);
      double val = tape.val(loss)[0];
      if (!grad.empty()) {
        double seed = 1.0;
        tape.backward(loss, std::span<const double>(&seed, 1));
        model.accumulate_grads(tape, bind);
        off = 0;
        for (int i = 0; i < params.count(); ++i) {
          Param& p = params.at(i);
          std::copy(p.grad.begin(), p.grad.end(), grad.begin() + static_cast<long>(off));
          off += p.size();
        }
      }
      return val;
    };

    double err = grad_check(f, x0, step);
    r.ok = err < tol;
    r.detail = "err=" + fmt(err) + " tol=" + fmt(tol) + " over " + std::to_string(x0.size()) +
               " parameters";
  });
}

// ---------------------------------------------------------------------------
// Sampler symmetry

SuiteResult suite_sampler_symmetry(const Denoiser& model, int n_motors, double tol,
                                   uint64_t seed) {
  return timed("sampler-symmetry", [&](SuiteResult& r) {
    DiffusionSchedule s = DiffusionSchedule::linear();
    std::mt19937_64 rng(seed);
    std::vector<Vec3> cloud;
    for (int i = 0; i < 24; ++i) {
      auto v = random_vec(rng, 3);
      cloud.push_back({0.03 * v[0], 0.03 * v[1], 0.03 * v[2]});
    }
    int dim = 9 + model.config().joint_dim;
    double sqrt_abar_T = std::sqrt(s.abar(s.T));

    double worst = 0.0;
    double worst_q = 0.0;
    for (int m = 0; m < n_motors; ++m) {
      RigidAction act = random_motor_action(rng, 0.1);
      NoiseStream ns = draw_noise_stream(s, dim, rng);
      SampleResult a = sample_with_noise(s, model, cloud, ns);
      SampleResult b = sample_with_noise(s, model, act_cloud(act.R, act.t, cloud),
                                         act_noise_stream(act.R, act.t, sqrt_abar_T, ns));
      std::vector<double> want = act_flat_grasp(act.R, act.t, 1.0, a.flat_g0);
      std::vector<double> first9a(want.begin(), want.begin() + 9);
      std::vector<double> first9b(b.flat_g0.begin(), b.flat_g0.begin() + 9);
      worst = std::max(worst, rel_err(first9a, first9b));
      for (int j = 9; j < dim; ++j)
        worst_q = std::max(worst_q, std::abs(a.flat_g0[static_cast<size_t>(j)] -
                                             b.flat_g0[static_cast<size_t>(j)]));
    }
    r.ok = worst < tol && worst_q == 0.0;
    r.detail = "err=" + fmt(worst) + " tol=" + fmt(tol) + " joint_drift=" + fmt(worst_q) +
               " (must be 0), motors=" + std::to_string(n_motors);
  });
}

// ---------------------------------------------------------------------------
// Physics unit suite

SuiteResult suite_physics_units() {
  return timed("physics-units", [](SuiteResult& r) {
    std::vector<std::string> fails;
    std::mt19937_64 rng(31);

    // free object: no contacts, stability loss is exactly the mean |v0|^2
    SimScene scene;
    for (int i = 0; i < 20; ++i) {
      auto v = random_vec(rng, 3);
      scene.obj_points.push_back({0.02 * v[0], 0.02 * v[1], 0.02 * v[2]});
    }
    std::vector<Vec3> vset = default_velocity_set(0.1);
    double want = 0.0;
    for (const auto& v : vset) want += dot(v, v);
    want /= static_cast<double>(vset.size());
    double got = stability_loss(scene, vset);
    if (got != want) fails.push_back("free-object stability " + fmt(got) + " != " + fmt(want));

    // free object under constant acceleration: displacement follows the
    // continuous arc a t^2 / 2; semi-implicit Euler overshoots it by half an
    // internal step, so allow a one-external-step discretization margin
    RolloutResult roll = rollout(scene, {0, 0, 0}, {0, 0, 0}, {0.5, 0, 0});
    double T = scene.dt * scene.T_sim;
    double kin = 0.5 * 0.5 * T * T;
    double slack = 0.5 * 0.5 * scene.dt * T;  // a T dt / 2
    if (roll.max_displacement < kin - 1e-12 || roll.max_displacement > kin + slack + 1e-12)
      fails.push_back("free-object kinematics " + fmt(roll.max_displacement) +
                      " outside [" + fmt(kin) + ", " + fmt(kin + slack) + "]");
    if (roll.max_displacement < 0.02 || kin < 0.02)
      fails.push_back("free object should exceed the 2 cm displacement bound");

    // free object must fail success_eval
    HandSpec hand = toy_hand(2, 2);
    Grasp g;
    g.p = {10, 10, 10};  // far away, no contact
    g.q.assign(static_cast<size_t>(hand.joint_count()), 0.0);
    PhysContext ctx;
    ctx.hand = hand;
    ctx.obj_points = scene.obj_points;
    SuccessReport rep = success_eval(g, scene.obj_points, hand, ctx);
    if (rep.pass) fails.push_back("free object passed success_eval");

    // joint range / limit unit values (sums over joints)
    std::vector<double> lo{0.0, 0.0}, hi{1.0, 1.0};
    double rl = range_loss({0.25, 0.5}, lo, hi);
    double rl_want = (0.25 - 0.5) * (0.25 - 0.5);
    if (std::abs(rl - rl_want) > 1e-15) fails.push_back("range_loss " + fmt(rl));
    double ll = limit_loss({1.25, -0.5}, lo, hi);
    if (std::abs(ll - (0.25 + 0.5)) > 1e-15) fails.push_back("limit_loss " + fmt(ll));
    if (limit_loss({0.3, 0.7}, lo, hi) != 0.0) fails.push_back("limit_loss interior not 0");

    r.ok = fails.empty();
    if (fails.empty())
      r.detail = "free-object, kinematics, range/limit checks";
    else {
      r.detail = "failed:";
      for (const auto& f : fails) r.detail += " [" + f + "]";
    }
  });
}

// ---------------------------------------------------------------------------
// Statistical suites on a mini pipeline

VerifyArtifacts build_verify_pipeline(const RunConfig& base, const std::string& workdir,
                                      int train_steps) {
  VerifyArtifacts art;
  art.cfg = base;
  art.cfg.objects = 2;
  art.cfg.grasps_per_object = 4;
  art.cfg.cloud_points = 96;
  art.cfg.channels = 4;
  art.cfg.blocks = 2;
  art.cfg.heads = 2;
  art.cfg.downsample_m = 24;
  art.cfg.downsample_k = 6;
  art.cfg.steps = train_steps;
  art.cfg.batch = 4;
  art.cfg.physics_points = 48;
  art.cfg.lambda = 0.0;
  art.cfg.out_dir = workdir;
  std::filesystem::create_directories(workdir);
  gen_data(art.cfg);
  art.ckpt = workdir + "/model.ckpt";
  train(art.cfg, art.cfg.out_dir, art.ckpt, workdir + "/loss_curve.txt");
  return art;
}

SuiteResult suite_ood(const VerifyArtifacts& art, int n_each) {
  return timed("ood-ordering", [&](SuiteResult& r) {
    const RunConfig& cfg = art.cfg;
    int per_obj = std::max(1, n_each / cfg.objects);
    int nc = 0, nt = 0, sc = 0, st = 0;
    HandSpec hand = cfg.hand();
    for (int obj = 0; obj < cfg.objects; ++obj) {
      for (int pass = 0; pass < 2; ++pass) {
        CloudRecord cloud = read_cloud(cloud_file(cfg.out_dir, obj, pass == 1));
        PhysContext ctx = cfg.phys(cloud.points, false);
        std::vector<GraspRecord> recs = sample_cmd(
            cfg, art.ckpt, cloud, per_obj, 0.0, cfg.seed + 1000 + static_cast<uint64_t>(obj));
        for (const auto& rec : recs) {
          bool ok = success_eval(rec.grasp, cloud.points, hand, ctx).pass;
          if (pass == 0) {
            ++nc;
            sc += ok ? 1 : 0;
          } else {
            ++nt;
            st += ok ? 1 : 0;
          }
        }
      }
    }
    double pc = static_cast<double>(sc) / nc;
    double pt = static_cast<double>(st) / nt;
    double pooled = static_cast<double>(sc + st) / (nc + nt);
    double se = std::sqrt(std::max(pooled * (1 - pooled), 1e-12) *
                          (1.0 / nc + 1.0 / nt));
    double diff = std::abs(pc - pt);
    double bound = 1.96 * se;
    r.ok = diff <= bound || diff == 0.0;
    r.detail = "canonical " + std::to_string(sc) + "/" + std::to_string(nc) + " transformed " +
               std::to_string(st) + "/" + std::to_string(nt) + " |diff|=" + fmt(diff) +
               " 95% bound=" + fmt(bound);
  });
}

SuiteResult suite_refinement(const VerifyArtifacts& art, int pairs, bool lambda_sweep) {
  return timed("refinement-ordering", [&](SuiteResult& r) {
    const RunConfig& cfg = art.cfg;
    CloudRecord cloud = read_cloud(cloud_file(cfg.out_dir, 0));
    PhysContext ctx = cfg.phys(cloud.points);
    PhysContext ctx_full = cfg.phys(cloud.points, false);
    HandSpec hand = cfg.hand();
    DiffusionSchedule s = cfg.schedule();
    Denoiser model(cfg.net(), 0);
    model.load(art.ckpt);

    GuidanceConfig guid = cfg.guidance();
    guid.lambda = 1.0;
    GuidanceConfig guid_mid = guid;
    guid_mid.lambda = 0.1;

    int lower = 0, succ_u = 0, succ_g = 0, sweep_ok = 0;
    for (int i = 0; i < pairs; ++i) {
      std::mt19937_64 rng(cfg.seed + 500 + static_cast<uint64_t>(i));
      NoiseStream ns = draw_noise_stream(s, 9 + cfg.joint_dim(), rng);
      SampleResult un = sample_with_noise(s, model, cloud.points, ns);
      SampleResult gu = sample_with_noise(s, model, cloud.points, ns, guid, &ctx);
      double lu = phys_loss_value(un.grasp, ctx);
      double lg = phys_loss_value(gu.grasp, ctx);
      if (lg < lu) ++lower;
      if (success_eval(un.grasp, cloud.points, hand, ctx_full).pass) ++succ_u;
      if (success_eval(gu.grasp, cloud.points, hand, ctx_full).pass) ++succ_g;
      if (lambda_sweep) {
        SampleResult mid = sample_with_noise(s, model, cloud.points, ns, guid_mid, &ctx);
        double lm = phys_loss_value(mid.grasp, ctx);
        if (lu >= lm - 1e-12 && lm >= lg - 1e-12) ++sweep_ok;
      }
    }
    bool ok = lower >= (8 * pairs + 9) / 10 && succ_g >= succ_u;
    if (lambda_sweep) ok = ok && sweep_ok >= (8 * pairs + 9) / 10;
    r.ok = ok;
    r.detail = "l_phys lower in " + std::to_string(lower) + "/" + std::to_string(pairs) +
               " pairs, success " + std::to_string(succ_g) + " (guided) vs " +
               std::to_string(succ_u) + " (unguided)";
    if (lambda_sweep)
      r.detail += ", lambda sweep monotone in " + std::to_string(sweep_ok) + "/" +
                  std::to_string(pairs);
  });
}

// ---------------------------------------------------------------------------

int verify_cmd(const RunConfig& cfg, std::ostream& os) {
  std::vector<SuiteResult> results;
  results.push_back(suite_cayley());
  results.push_back(suite_tampered_cayley());
  results.push_back(suite_dual_join());
  results.push_back(suite_layer_equivariance(100, 1e-9));
  results.push_back(suite_denoiser_equivariance(5, 1e-6));
  results.push_back(suite_reflection_symmetry_breaking());
  results.push_back(suite_gradient_primitives(1e-5, 1e-4));
  results.push_back(suite_gradient_training_loss(1e-5, 1e-4));
  {
    EquiNetConfig ncfg;
    ncfg.blocks = 2;
    ncfg.channels = 4;
    ncfg.heads = 2;
    ncfg.downsample_m = 8;
    ncfg.downsample_k = 4;
    ncfg.joint_dim = cfg.joint_dim();
    Denoiser model(ncfg, 41);
    results.push_back(suite_sampler_symmetry(model, 20, 1e-5, 43));
  }
  results.push_back(suite_physics_units());

  std::string workdir = cfg.out_dir + "/verify";
  try {
    VerifyArtifacts art = build_verify_pipeline(cfg, workdir, 150);
    results.push_back(suite_ood(art, 48));
    results.push_back(suite_refinement(art, 12, false));
  } catch (const std::exception& e) {
    SuiteResult r;
    r.name = "mini-pipeline";
    r.ok = false;
    r.detail = std::string("exception: ") + e.what();
    results.push_back(r);
  }

  bool all_ok = true;
  for (const auto& r : results) {
    std::string status = !r.ok                 ? "FAIL"
                         : r.expected_failure ? "PASS-BY-EXPECTED-FAILURE"
                                              : "PASS";
    os << status << " " << r.name << " (" << std::fixed << std::setprecision(2) << r.seconds
       << " s) " << r.detail << "\n";
    os.unsetf(std::ios::fixed);
    if (!r.ok) all_ok = false;
  }
  os << (all_ok ? "VERIFY OK" : "VERIFY FAILED") << "\n";
  return all_ok ? 0 : 2;
}

}  // namespace gagrasp

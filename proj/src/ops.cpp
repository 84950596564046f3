#include "gagrasp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gagrasp/embed.hpp"
#include "gagrasp/multivector.hpp"

namespace gagrasp {

namespace {

void check_same_shape(const Tape& t, int a, int b, const char* who) {
  if (!(t.at(a).shape == t.at(b).shape))
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

struct BladeMeta {
  bool has_e0;
  int partner;  // blade with e0 toggled
  int grade;
};

// function-local static: safe against cross-TU initialization order
const std::array<BladeMeta, 16>& blade_meta() {
  static const std::array<BladeMeta, 16> m = [] {
    std::array<BladeMeta, 16> t{};
    for (int i = 0; i < 16; ++i) {
      uint8_t mask = kBladeMask[static_cast<size_t>(i)];
      t[static_cast<size_t>(i)] = {(mask & 1u) != 0,
                                   blade_index_from_mask(mask ^ 1u),
                                   kBladeGrade[static_cast<size_t>(i)]};
    }
    return t;
  }();
  return m;
}

// join(e_i, e_j) is always 0 or a single signed basis blade.
struct PairEntry {
  int8_t sign;
  int8_t target;
};
std::array<std::array<PairEntry, 16>, 16> make_join_table() {
  std::array<std::array<PairEntry, 16>, 16> t{};
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      Multivector r = join(Multivector::blade(i), Multivector::blade(j));
      t[i][j] = {0, 0};
      for (int k = 0; k < 16; ++k) {
        if (r[k] != 0.0) {
          t[i][j] = {static_cast<int8_t>(r[k] > 0 ? 1 : -1), static_cast<int8_t>(k)};
          break;
        }
      }
    }
  }
  return t;
}
// function-local so the multivector product tables in the other translation
// unit are guaranteed to be ready before the first use
const std::array<std::array<PairEntry, 16>, 16>& join_table() {
  static const auto table = make_join_table();
  return table;
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  double Phi = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return Phi + x * phi;
}

int op_add(Tape& t, int a, int b) {
  check_same_shape(t, a, b, "op_add");
  int out = t.alloc(t.at(a).shape);
  size_t n = t.at(a).shape.size();
  for (size_t i = 0; i < n; ++i) t.val(out)[i] = t.val(a)[i] + t.val(b)[i];
  t.push_node([a, b, out, n](Tape& tp) {
    for (size_t i = 0; i < n; ++i) {
      tp.grad(a)[i] += tp.grad(out)[i];
      tp.grad(b)[i] += tp.grad(out)[i];
    }
  });
  return out;
}

int op_sub(Tape& t, int a, int b) {
  check_same_shape(t, a, b, "op_sub");
  int out = t.alloc(t.at(a).shape);
  size_t n = t.at(a).shape.size();
  for (size_t i = 0; i < n; ++i) t.val(out)[i] = t.val(a)[i] - t.val(b)[i];
  t.push_node([a, b, out, n](Tape& tp) {
    for (size_t i = 0; i < n; ++i) {
      tp.grad(a)[i] += tp.grad(out)[i];
      tp.grad(b)[i] -= tp.grad(out)[i];
    }
  });
  return out;
}

int op_scale(Tape& t, int a, double s) {
  int out = t.alloc(t.at(a).shape);
  size_t n = t.at(a).shape.size();
  for (size_t i = 0; i < n; ++i) t.val(out)[i] = t.val(a)[i] * s;
  t.push_node([a, out, n, s](Tape& tp) {
    for (size_t i = 0; i < n; ++i) tp.grad(a)[i] += s * tp.grad(out)[i];
  });
  return out;
}

int op_mul(Tape& t, int a, int b) {
  check_same_shape(t, a, b, "op_mul");
  int out = t.alloc(t.at(a).shape);
  size_t n = t.at(a).shape.size();
  for (size_t i = 0; i < n; ++i) t.val(out)[i] = t.val(a)[i] * t.val(b)[i];
  t.push_node([a, b, out, n](Tape& tp) {
    for (size_t i = 0; i < n; ++i) {
      tp.grad(a)[i] += tp.val(b)[i] * tp.grad(out)[i];
      tp.grad(b)[i] += tp.val(a)[i] * tp.grad(out)[i];
    }
  });
  return out;
}

int op_geometric_product(Tape& t, int x, int y) {
  check_same_shape(t, x, y, "op_geometric_product");
  const TapeShape sh = t.at(x).shape;
  if (sh.comp != 16) throw std::invalid_argument("op_geometric_product: not a multivector tensor");
  int out = t.alloc(sh);
  size_t cells = static_cast<size_t>(sh.tokens) * sh.channels;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* xv = t.val(x) + cell * 16;
    const double* yv = t.val(y) + cell * 16;
    double* ov = t.val(out) + cell * 16;
    for (int i = 0; i < 16; ++i) {
      double xi = xv[i];
      if (xi == 0.0) continue;
      for (int j = 0; j < 16; ++j) {
        int s;
        int k = basis_product(i, j, &s);
        if (k >= 0) ov[k] += s * xi * yv[j];
      }
    }
  }
  t.push_node([x, y, out, cells](Tape& tp) {
    for (size_t cell = 0; cell < cells; ++cell) {
      const double* xv = tp.val(x) + cell * 16;
      const double* yv = tp.val(y) + cell * 16;
      const double* go = tp.grad(out) + cell * 16;
      double* gx = tp.grad(x) + cell * 16;
      double* gy = tp.grad(y) + cell * 16;
      for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
          int s;
          int k = basis_product(i, j, &s);
          if (k < 0) continue;
          gx[i] += s * go[k] * yv[j];
          gy[j] += s * go[k] * xv[i];
        }
      }
    }
  });
  return out;
}

int op_join_scaled(Tape& t, int x, int y, int zref) {
  check_same_shape(t, x, y, "op_join_scaled");
  check_same_shape(t, x, zref, "op_join_scaled(zref)");
  const TapeShape sh = t.at(x).shape;
  if (sh.comp != 16) throw std::invalid_argument("op_join_scaled: not a multivector tensor");
  int out = t.alloc(sh);
  size_t cells = static_cast<size_t>(sh.tokens) * sh.channels;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* xv = t.val(x) + cell * 16;
    const double* yv = t.val(y) + cell * 16;
    double ps = t.val(zref)[cell * 16 + kE0123];
    double* ov = t.val(out) + cell * 16;
    for (int i = 0; i < 16; ++i) {
      double xi = xv[i];
      if (xi == 0.0) continue;
      for (int j = 0; j < 16; ++j) {
        PairEntry e = join_table()[i][j];
        if (e.sign != 0) ov[e.target] += ps * e.sign * xi * yv[j];
      }
    }
  }
  t.push_node([x, y, zref, out, cells](Tape& tp) {
    for (size_t cell = 0; cell < cells; ++cell) {
      const double* xv = tp.val(x) + cell * 16;
      const double* yv = tp.val(y) + cell * 16;
      const double* go = tp.grad(out) + cell * 16;
      double ps = tp.val(zref)[cell * 16 + kE0123];
      double* gx = tp.grad(x) + cell * 16;
      double* gy = tp.grad(y) + cell * 16;
      double gps = 0.0;
      for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
          PairEntry e = join_table()[i][j];
          if (e.sign == 0) continue;
          double g = go[e.target] * e.sign;
          gx[i] += ps * g * yv[j];
          gy[j] += ps * g * xv[i];
          gps += g * xv[i] * yv[j];
        }
      }
      tp.grad(zref)[cell * 16 + kE0123] += gps;
    }
  });
  return out;
}

int op_equi_linear(Tape& t, int x, int wv, int in_ch, int out_ch) {
  const TapeShape xs = t.at(x).shape;
  if (xs.comp != 16 || xs.channels != in_ch)
    throw std::invalid_argument("op_equi_linear: input channel mismatch");
  const TapeShape ws = t.at(wv).shape;
  if (ws.tokens != out_ch || ws.channels != in_ch || ws.comp != 9)
    throw std::invalid_argument("op_equi_linear: weight shape mismatch");
  TapeShape os{xs.tokens, out_ch, 16};
  int out = t.alloc(os);
  int T = xs.tokens;
  for (int tok = 0; tok < T; ++tok) {
    for (int co = 0; co < out_ch; ++co) {
      double* ov = t.val(out) + (static_cast<size_t>(tok) * out_ch + co) * 16;
      for (int ci = 0; ci < in_ch; ++ci) {
        const double* xv = t.val(x) + (static_cast<size_t>(tok) * in_ch + ci) * 16;
        const double* p = t.val(wv) + (static_cast<size_t>(co) * in_ch + ci) * 9;
        for (int b = 0; b < 16; ++b) {
          const BladeMeta& m = blade_meta()[static_cast<size_t>(b)];
          double acc = p[m.grade] * xv[b];
          if (m.has_e0) {
            // e0 * <x>_g lands here from the partner blade without e0
            const BladeMeta& pm = blade_meta()[static_cast<size_t>(m.partner)];
            acc += p[5 + pm.grade] * xv[m.partner];
          }
          ov[b] += acc;
        }
      }
    }
  }
  t.push_node([x, wv, out, in_ch, out_ch, T](Tape& tp) {
    for (int tok = 0; tok < T; ++tok) {
      for (int co = 0; co < out_ch; ++co) {
        const double* go = tp.grad(out) + (static_cast<size_t>(tok) * out_ch + co) * 16;
        for (int ci = 0; ci < in_ch; ++ci) {
          const double* xv = tp.val(x) + (static_cast<size_t>(tok) * in_ch + ci) * 16;
          const double* p = tp.val(wv) + (static_cast<size_t>(co) * in_ch + ci) * 9;
          double* gx = tp.grad(x) + (static_cast<size_t>(tok) * in_ch + ci) * 16;
          double* gp = tp.grad(wv) + (static_cast<size_t>(co) * in_ch + ci) * 9;
          for (int b = 0; b < 16; ++b) {
            const BladeMeta& m = blade_meta()[static_cast<size_t>(b)];
            double g = go[b];
            if (g == 0.0) continue;
            gx[b] += p[m.grade] * g;
            gp[m.grade] += xv[b] * g;
            if (m.has_e0) {
              const BladeMeta& pm = blade_meta()[static_cast<size_t>(m.partner)];
              gx[m.partner] += p[5 + pm.grade] * g;
              gp[5 + pm.grade] += xv[m.partner] * g;
            }
          }
        }
      }
    }
  });
  return out;
}

int op_equi_attention(Tape& t, int q, int k, int v, int heads) {
  const TapeShape qs = t.at(q).shape;
  const TapeShape ks = t.at(k).shape;
  const TapeShape vs = t.at(v).shape;
  if (ks.tokens != vs.tokens)
    throw std::invalid_argument("op_equi_attention: key/value token count mismatch");
  if (qs.channels != ks.channels || ks.channels != vs.channels || qs.comp != 16)
    throw std::invalid_argument("op_equi_attention: channel mismatch");
  int C = qs.channels;
  if (heads < 1 || C % heads != 0)
    throw std::invalid_argument("op_equi_attention: heads must divide channels");
  int cph = C / heads;
  double scale = 1.0 / std::sqrt(8.0 * cph);
  int Tq = qs.tokens, Tk = ks.tokens;
  int out = t.alloc(qs);

  // weights saved for the backward pass: [head][tq][tk]
  auto weights = std::make_shared<std::vector<double>>(
      static_cast<size_t>(heads) * Tq * Tk, 0.0);

  for (int h = 0; h < heads; ++h) {
    for (int tq = 0; tq < Tq; ++tq) {
      std::vector<double> logits(static_cast<size_t>(Tk), 0.0);
      for (int tk = 0; tk < Tk; ++tk) {
        double acc = 0.0;
        for (int c = h * cph; c < (h + 1) * cph; ++c) {
          const double* qv = t.val(q) + (static_cast<size_t>(tq) * C + c) * 16;
          const double* kv = t.val(k) + (static_cast<size_t>(tk) * C + c) * 16;
          for (int d : kNonE0Blades) acc += qv[d] * kv[d];
        }
        logits[static_cast<size_t>(tk)] = acc * scale;
      }
      double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - mx);
        z += l;
      }
      double* w = weights->data() + (static_cast<size_t>(h) * Tq + tq) * Tk;
      for (int tk = 0; tk < Tk; ++tk) w[tk] = logits[static_cast<size_t>(tk)] / z;
      for (int c = h * cph; c < (h + 1) * cph; ++c) {
        double* ov = t.val(out) + (static_cast<size_t>(tq) * C + c) * 16;
        for (int tk = 0; tk < Tk; ++tk) {
          const double* vv = t.val(v) + (static_cast<size_t>(tk) * C + c) * 16;
          for (int d = 0; d < 16; ++d) ov[d] += w[tk] * vv[d];
        }
      }
    }
  }

  t.push_node([q, k, v, out, heads, cph, C, Tq, Tk, scale, weights](Tape& tp) {
    for (int h = 0; h < heads; ++h) {
      for (int tq = 0; tq < Tq; ++tq) {
        const double* w = weights->data() + (static_cast<size_t>(h) * Tq + tq) * Tk;
        std::vector<double> gw(static_cast<size_t>(Tk), 0.0);
        for (int tk = 0; tk < Tk; ++tk) {
          double acc = 0.0;
          for (int c = h * cph; c < (h + 1) * cph; ++c) {
            const double* go = tp.grad(out) + (static_cast<size_t>(tq) * C + c) * 16;
            const double* vv = tp.val(v) + (static_cast<size_t>(tk) * C + c) * 16;
            double* gv = tp.grad(v) + (static_cast<size_t>(tk) * C + c) * 16;
            for (int d = 0; d < 16; ++d) {
              acc += go[d] * vv[d];
              gv[d] += w[tk] * go[d];
            }
          }
          gw[static_cast<size_t>(tk)] = acc;
        }
        double dot = 0.0;
        for (int tk = 0; tk < Tk; ++tk) dot += w[tk] * gw[static_cast<size_t>(tk)];
        for (int tk = 0; tk < Tk; ++tk) {
          double gl = w[tk] * (gw[static_cast<size_t>(tk)] - dot) * scale;
          if (gl == 0.0) continue;
          for (int c = h * cph; c < (h + 1) * cph; ++c) {
            const double* qv = tp.val(q) + (static_cast<size_t>(tq) * C + c) * 16;
            const double* kv = tp.val(k) + (static_cast<size_t>(tk) * C + c) * 16;
            double* gq = tp.grad(q) + (static_cast<size_t>(tq) * C + c) * 16;
            double* gk = tp.grad(k) + (static_cast<size_t>(tk) * C + c) * 16;
            for (int d : kNonE0Blades) {
              gq[d] += gl * kv[d];
              gk[d] += gl * qv[d];
            }
          }
        }
      }
    }
  });
  return out;
}

int op_gated_gelu(Tape& t, int x) {
  const TapeShape sh = t.at(x).shape;
  if (sh.comp != 16) throw std::invalid_argument("op_gated_gelu: not a multivector tensor");
  int out = t.alloc(sh);
  size_t cells = static_cast<size_t>(sh.tokens) * sh.channels;
  for (size_t cell = 0; cell < cells; ++cell) {
    const double* xv = t.val(x) + cell * 16;
    double* ov = t.val(out) + cell * 16;
    double g = gelu(xv[0]);
    for (int d = 0; d < 16; ++d) ov[d] = g * xv[d];
  }
  t.push_node([x, out, cells](Tape& tp) {
    for (size_t cell = 0; cell < cells; ++cell) {
      const double* xv = tp.val(x) + cell * 16;
      const double* go = tp.grad(out) + cell * 16;
      double* gx = tp.grad(x) + cell * 16;
      double s = xv[0];
      double g = gelu(s);
      double dotted = 0.0;
      for (int d = 0; d < 16; ++d) {
        gx[d] += g * go[d];
        dotted += go[d] * xv[d];
      }
      gx[0] += gelu_grad(s) * dotted;
    }
  });
  return out;
}

int op_equi_layernorm(Tape& t, int x, double eps) {
  const TapeShape sh = t.at(x).shape;
  if (sh.comp != 16) throw std::invalid_argument("op_equi_layernorm: not a multivector tensor");
  int C = sh.channels;
  int out = t.alloc(sh);
  auto scales = std::make_shared<std::vector<double>>(static_cast<size_t>(sh.tokens));
  for (int tok = 0; tok < sh.tokens; ++tok) {
    double m = 0.0;
    for (int c = 0; c < C; ++c) {
      const double* xv = t.val(x) + (static_cast<size_t>(tok) * C + c) * 16;
      for (int d : kNonE0Blades) m += xv[d] * xv[d];
    }
    m /= C;
    double s = 1.0 / std::sqrt(m + eps);
    (*scales)[static_cast<size_t>(tok)] = s;
    for (int c = 0; c < C; ++c) {
      const double* xv = t.val(x) + (static_cast<size_t>(tok) * C + c) * 16;
      double* ov = t.val(out) + (static_cast<size_t>(tok) * C + c) * 16;
      for (int d = 0; d < 16; ++d) ov[d] = xv[d] * s;
    }
  }
  int T = sh.tokens;
  t.push_node([x, out, C, T, scales](Tape& tp) {
    for (int tok = 0; tok < T; ++tok) {
      double s = (*scales)[static_cast<size_t>(tok)];
      double gs = 0.0;
      for (int c = 0; c < C; ++c) {
        const double* go = tp.grad(out) + (static_cast<size_t>(tok) * C + c) * 16;
        const double* xv = tp.val(x) + (static_cast<size_t>(tok) * C + c) * 16;
        for (int d = 0; d < 16; ++d) gs += go[d] * xv[d];
      }
      double gm = gs * (-0.5) * s * s * s;
      for (int c = 0; c < C; ++c) {
        const double* go = tp.grad(out) + (static_cast<size_t>(tok) * C + c) * 16;
        const double* xv = tp.val(x) + (static_cast<size_t>(tok) * C + c) * 16;
        double* gx = tp.grad(x) + (static_cast<size_t>(tok) * C + c) * 16;
        for (int d = 0; d < 16; ++d) gx[d] += go[d] * s;
        for (int d : kNonE0Blades) gx[d] += gm * 2.0 * xv[d] / C;
      }
    }
  });
  return out;
}

int op_mean_channels(Tape& t, int x) {
  const TapeShape sh = t.at(x).shape;
  TapeShape os{sh.tokens, 1, sh.comp};
  int out = t.alloc(os);
  int C = sh.channels, P = sh.comp;
  for (int tok = 0; tok < sh.tokens; ++tok) {
    double* ov = t.val(out) + static_cast<size_t>(tok) * P;
    for (int c = 0; c < C; ++c) {
      const double* xv = t.val(x) + (static_cast<size_t>(tok) * C + c) * P;
      for (int d = 0; d < P; ++d) ov[d] += xv[d] / C;
    }
  }
  int T = sh.tokens;
  t.push_node([x, out, C, P, T](Tape& tp) {
    for (int tok = 0; tok < T; ++tok) {
      const double* go = tp.grad(out) + static_cast<size_t>(tok) * P;
      for (int c = 0; c < C; ++c) {
        double* gx = tp.grad(x) + (static_cast<size_t>(tok) * C + c) * P;
        for (int d = 0; d < P; ++d) gx[d] += go[d] / C;
      }
    }
  });
  return out;
}

int op_concat_channels(Tape& t, int a, int b) {
  const TapeShape as = t.at(a).shape;
  const TapeShape bs = t.at(b).shape;
  if (as.tokens != bs.tokens || as.comp != bs.comp)
    throw std::invalid_argument("op_concat_channels: shape mismatch");
  TapeShape os{as.tokens, as.channels + bs.channels, as.comp};
  int out = t.alloc(os);
  int P = as.comp;
  for (int tok = 0; tok < as.tokens; ++tok) {
    double* ov = t.val(out) + static_cast<size_t>(tok) * os.channels * P;
    const double* av = t.val(a) + static_cast<size_t>(tok) * as.channels * P;
    const double* bv = t.val(b) + static_cast<size_t>(tok) * bs.channels * P;
    std::copy(av, av + static_cast<size_t>(as.channels) * P, ov);
    std::copy(bv, bv + static_cast<size_t>(bs.channels) * P, ov + static_cast<size_t>(as.channels) * P);
  }
  int T = as.tokens, Ca = as.channels, Cb = bs.channels;
  t.push_node([a, b, out, T, Ca, Cb, P](Tape& tp) {
    int Co = Ca + Cb;
    for (int tok = 0; tok < T; ++tok) {
      const double* go = tp.grad(out) + static_cast<size_t>(tok) * Co * P;
      double* ga = tp.grad(a) + static_cast<size_t>(tok) * Ca * P;
      double* gb = tp.grad(b) + static_cast<size_t>(tok) * Cb * P;
      for (size_t i = 0; i < static_cast<size_t>(Ca) * P; ++i) ga[i] += go[i];
      for (size_t i = 0; i < static_cast<size_t>(Cb) * P; ++i)
        gb[i] += go[static_cast<size_t>(Ca) * P + i];
    }
  });
  return out;
}

int op_select_tokens(Tape& t, int x, const std::vector<int>& idx, int out_tokens) {
  const TapeShape sh = t.at(x).shape;
  int C = sh.channels, P = sh.comp;
  if (idx.size() != static_cast<size_t>(out_tokens) * C)
    throw std::invalid_argument("op_select_tokens: index count mismatch");
  for (int i : idx)
    if (i < 0 || i >= sh.tokens) throw std::invalid_argument("op_select_tokens: index out of range");
  TapeShape os{out_tokens, C, P};
  int out = t.alloc(os);
  for (int tok = 0; tok < out_tokens; ++tok) {
    for (int c = 0; c < C; ++c) {
      int src = idx[static_cast<size_t>(tok) * C + c];
      const double* xv = t.val(x) + (static_cast<size_t>(src) * C + c) * P;
      double* ov = t.val(out) + (static_cast<size_t>(tok) * C + c) * P;
      std::copy(xv, xv + P, ov);
    }
  }
  t.push_node([x, out, idx, out_tokens, C, P](Tape& tp) {
    for (int tok = 0; tok < out_tokens; ++tok) {
      for (int c = 0; c < C; ++c) {
        int src = idx[static_cast<size_t>(tok) * C + c];
        const double* go = tp.grad(out) + (static_cast<size_t>(tok) * C + c) * P;
        double* gx = tp.grad(x) + (static_cast<size_t>(src) * C + c) * P;
        for (int d = 0; d < P; ++d) gx[d] += go[d];
      }
    }
  });
  return out;
}

int op_inject_scalar(Tape& t, int x, int s, int token) {
  const TapeShape sh = t.at(x).shape;
  const TapeShape ss = t.at(s).shape;
  if (sh.comp != 16 || ss.comp != 1 || ss.tokens != 1 || ss.channels != sh.channels)
    throw std::invalid_argument("op_inject_scalar: shape mismatch");
  if (token < 0 || token >= sh.tokens) throw std::invalid_argument("op_inject_scalar: bad token");
  int out = t.alloc(sh);
  size_t n = sh.size();
  std::copy(t.val(x), t.val(x) + n, t.val(out));
  int C = sh.channels;
  for (int c = 0; c < C; ++c)
    t.val(out)[(static_cast<size_t>(token) * C + c) * 16] += t.val(s)[c];
  t.push_node([x, s, out, token, C, n](Tape& tp) {
    for (size_t i = 0; i < n; ++i) tp.grad(x)[i] += tp.grad(out)[i];
    for (int c = 0; c < C; ++c)
      tp.grad(s)[c] += tp.grad(out)[(static_cast<size_t>(token) * C + c) * 16];
  });
  return out;
}

int op_dense(Tape& t, int x, int W, int b, int in_w, int out_w) {
  const TapeShape xs = t.at(x).shape;
  if (xs.comp != 1 || xs.channels != in_w)
    throw std::invalid_argument("op_dense: input width mismatch");
  if (t.at(W).shape.size() != static_cast<size_t>(out_w) * in_w ||
      t.at(b).shape.size() != static_cast<size_t>(out_w))
    throw std::invalid_argument("op_dense: weight shape mismatch");
  TapeShape os{xs.tokens, out_w, 1};
  int out = t.alloc(os);
  for (int tok = 0; tok < xs.tokens; ++tok) {
    const double* xv = t.val(x) + static_cast<size_t>(tok) * in_w;
    double* ov = t.val(out) + static_cast<size_t>(tok) * out_w;
    for (int o = 0; o < out_w; ++o) {
      double acc = t.val(b)[o];
      const double* wr = t.val(W) + static_cast<size_t>(o) * in_w;
      for (int i = 0; i < in_w; ++i) acc += wr[i] * xv[i];
      ov[o] = acc;
    }
  }
  int T = xs.tokens;
  t.push_node([x, W, b, out, in_w, out_w, T](Tape& tp) {
    for (int tok = 0; tok < T; ++tok) {
      const double* xv = tp.val(x) + static_cast<size_t>(tok) * in_w;
      const double* go = tp.grad(out) + static_cast<size_t>(tok) * out_w;
      double* gx = tp.grad(x) + static_cast<size_t>(tok) * in_w;
      for (int o = 0; o < out_w; ++o) {
        double g = go[o];
        if (g == 0.0) continue;
        tp.grad(b)[o] += g;
        const double* wr = tp.val(W) + static_cast<size_t>(o) * in_w;
        double* gw = tp.grad(W) + static_cast<size_t>(o) * in_w;
        for (int i = 0; i < in_w; ++i) {
          gw[i] += g * xv[i];
          gx[i] += g * wr[i];
        }
      }
    }
  });
  return out;
}

int op_gelu(Tape& t, int x) {
  const TapeShape sh = t.at(x).shape;
  int out = t.alloc(sh);
  size_t n = sh.size();
  for (size_t i = 0; i < n; ++i) t.val(out)[i] = gelu(t.val(x)[i]);
  t.push_node([x, out, n](Tape& tp) {
    for (size_t i = 0; i < n; ++i)
      tp.grad(x)[i] += gelu_grad(tp.val(x)[i]) * tp.grad(out)[i];
  });
  return out;
}

int op_read_directions(Tape& t, int x, int token, const std::vector<int>& channels) {
  const TapeShape sh = t.at(x).shape;
  if (sh.comp != 16) throw std::invalid_argument("op_read_directions: not a multivector tensor");
  int n = static_cast<int>(channels.size());
  TapeShape os{1, 3 * n, 1};
  int out = t.alloc(os);
  int C = sh.channels;
  for (int i = 0; i < n; ++i) {
    const double* xv = t.val(x) + (static_cast<size_t>(token) * C + channels[static_cast<size_t>(i)]) * 16;
    for (int a = 0; a < 3; ++a)
      t.val(out)[3 * i + a] = kDirSign[a] * xv[kDirBlade[a]];
  }
  t.push_node([x, out, token, channels, C, n](Tape& tp) {
    for (int i = 0; i < n; ++i) {
      double* gx = tp.grad(x) + (static_cast<size_t>(token) * C + channels[static_cast<size_t>(i)]) * 16;
      for (int a = 0; a < 3; ++a)
        gx[kDirBlade[a]] += kDirSign[a] * tp.grad(out)[3 * i + a];
    }
  });
  return out;
}

int op_sum(Tape& t, int x) {
  int out = t.alloc(TapeShape{1, 1, 1});
  size_t n = t.at(x).shape.size();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += t.val(x)[i];
  t.val(out)[0] = acc;
  t.push_node([x, out, n](Tape& tp) {
    double g = tp.grad(out)[0];
    for (size_t i = 0; i < n; ++i) tp.grad(x)[i] += g;
  });
  return out;
}

int op_mse(Tape& t, int x, std::span<const double> ref) {
  size_t n = t.at(x).shape.size();
  if (ref.size() != n) throw std::invalid_argument("op_mse: reference size mismatch");
  int out = t.alloc(TapeShape{1, 1, 1});
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = t.val(x)[i] - ref[i];
    acc += d * d;
  }
  t.val(out)[0] = acc / n;
  auto refv = std::make_shared<std::vector<double>>(ref.begin(), ref.end());
  t.push_node([x, out, n, refv](Tape& tp) {
    double g = tp.grad(out)[0];
    for (size_t i = 0; i < n; ++i)
      tp.grad(x)[i] += g * 2.0 * (tp.val(x)[i] - (*refv)[i]) / n;
  });
  return out;
}

double grad_check(const std::function<double(std::span<const double>, std::span<double>)>& f,
                  std::span<const double> x, double step, double atol_floor) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");
  std::vector<double> xv(x.begin(), x.end());
  std::vector<double> analytic(xv.size(), 0.0);
  double f0 = f(xv, analytic);
  if (!std::isfinite(f0)) throw std::runtime_error("grad_check: non-finite function value");
  std::vector<double> dummy(xv.size());
  double worst = 0.0;
  for (size_t i = 0; i < xv.size(); ++i) {
    double keep = xv[i];
    xv[i] = keep + step;
    double fp = f(xv, dummy);
    xv[i] = keep - step;
    double fm = f(xv, dummy);
    xv[i] = keep;
    double num = (fp - fm) / (2.0 * step);
    double denom = std::max({std::abs(num), std::abs(analytic[i]), atol_floor});
    worst = std::max(worst, std::abs(num - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace gagrasp

#include "gagrasp/physics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gagrasp {

namespace {

Mat3 invert3(const Mat3& m) {
  double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-18) throw std::runtime_error("invert3: singular inertia");
  double inv = 1.0 / det;
  Mat3 r;
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv;
  return r;
}

// Inertia of the point cloud about its centroid, in body frame.
Mat3 point_cloud_inertia(const std::vector<Vec3>& pts, double mass, Vec3* com) {
  if (pts.size() < 3) throw std::invalid_argument("SimScene: object needs >= 3 points");
  Vec3 c{0, 0, 0};
  for (const auto& p : pts)
    for (int i = 0; i < 3; ++i) c[i] += p[i];
  for (int i = 0; i < 3; ++i) c[i] /= static_cast<double>(pts.size());
  double mi = mass / static_cast<double>(pts.size());
  Mat3 I{};
  for (const auto& p : pts) {
    Vec3 r = {p[0] - c[0], p[1] - c[1], p[2] - c[2]};
    double rr = dot(r, r);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) I[a][b] += mi * ((a == b ? rr : 0.0) - r[a] * r[b]);
  }
  *com = c;
  return I;
}

}  // namespace

std::vector<Vec3> default_velocity_set(double speed) {
  return {{speed, 0, 0}, {-speed, 0, 0}, {0, speed, 0},
          {0, -speed, 0}, {0, 0, speed}, {0, 0, -speed}};
}

RolloutResult rollout(const SimScene& scene, const Vec3& v0, const Vec3& w0,
                      const Vec3& accel, bool keep_trace) {
  if (scene.dt <= 0.0) throw std::invalid_argument("rollout: dt must be positive");
  Vec3 com;
  Mat3 Ibody = point_cloud_inertia(scene.obj_points, scene.mass, &com);
  std::vector<Vec3> body;  // points relative to COM
  body.reserve(scene.obj_points.size());
  for (const auto& p : scene.obj_points)
    body.push_back({p[0] - com[0], p[1] - com[1], p[2] - com[2]});

  Mat3 R = scene.R0;
  Vec3 com0 = mat_apply(scene.R0, com);
  Vec3 p = {scene.p0[0] + com0[0], scene.p0[1] + com0[1], scene.p0[2] + com0[2]};
  Vec3 p_init = p;
  Vec3 v = v0, w = w0;

  double ke0 = 0.5 * scene.mass * dot(v, v);
  {
    Vec3 Iw = mat_apply(mat_mul(mat_mul(R, Ibody), mat_transpose(R)), w);
    ke0 += 0.5 * dot(w, Iw);
  }
  double speed_bound = norm(v0) + norm(accel) * scene.dt * scene.T_sim;
  double g_gain = scene.gravity ? 9.81 * scene.dt * scene.T_sim : 0.0;
  speed_bound += g_gain;
  // elastic energy already stored in penetrating contacts at t=0; a squeezed
  // grasp legitimately converts this into kinetic energy when contacts release
  // one contact per hand sphere. The force magnitude uses the deepest
  // penetration (per-point forces would scale the effective stiffness with
  // cloud density past the explicit integrator's limit), but the application
  // point and normal are a penetration-softmax average over all penetrating
  // points. A single deepest point sits off the line of action by the cloud
  // spacing and hops between points as the object rotates, which injects
  // torque noise that pumps spin; the average is continuous in time and its
  // lever-arm error shrinks with the smoothing length h.
  const double kSmoothing = 5e-4;  // m, on the order of the cloud spacing
  // world-frame point offsets R * body[i], refreshed once per step and shared
  // by every hand sphere
  std::vector<Vec3> rws(body.size());
  auto refresh_points = [&](const Mat3& Rc) {
    for (size_t i = 0; i < body.size(); ++i) rws[i] = mat_apply(Rc, body[i]);
  };
  auto deepest = [&](const Sphere& s, const Vec3& pc, Vec3* rw_out,
                     Vec3* n_out) -> double {
    double best = 0.0;
    for (const auto& rw : rws) {
      Vec3 d = {pc[0] + rw[0] - s.center[0], pc[1] + rw[1] - s.center[1],
                pc[2] + rw[2] - s.center[2]};
      double pen = s.radius - norm(d);
      if (pen > best) best = pen;
    }
    if (best <= 0.0) return 0.0;
    double wsum = 0.0;
    Vec3 rw_acc{0, 0, 0}, n_acc{0, 0, 0};
    for (const auto& rw : rws) {
      Vec3 d = {pc[0] + rw[0] - s.center[0], pc[1] + rw[1] - s.center[1],
                pc[2] + rw[2] - s.center[2]};
      double dist = norm(d);
      double pen = s.radius - dist;
      if (pen <= 0.0 || dist <= 1e-12) continue;
      double wt = std::exp((pen - best) / kSmoothing);
      wsum += wt;
      for (int a = 0; a < 3; ++a) {
        rw_acc[a] += wt * rw[a];
        n_acc[a] += wt * d[a] / dist;
      }
    }
    double nn = norm(n_acc);
    if (wsum <= 0.0 || nn <= 1e-12) return 0.0;
    *rw_out = {rw_acc[0] / wsum, rw_acc[1] / wsum, rw_acc[2] / wsum};
    *n_out = {n_acc[0] / nn, n_acc[1] / nn, n_acc[2] / nn};
    return best;
  };

  double pe0 = 0.0;
  refresh_points(R);
  for (const auto& s : scene.hand_spheres) {
    Vec3 rw, n;
    double pen = deepest(s, p, &rw, &n);
    if (pen > 0.0) pe0 += 0.5 * scene.k_n * pen * pen;
  }
  double ke_bound = 10.0 * (ke0 + pe0 + 0.5 * scene.mass * speed_bound * speed_bound + 1e-9);

  RolloutResult out;
  // the stiff contact modes (normal bounce between opposing contacts and the
  // rotational bounce of the contact springs) sit near the explicit stability
  // limit at dt; integrate internally at dt / kSub while keeping the external
  // dt, T_sim semantics
  const int kSub = 5;
  const double dtp = scene.dt / kSub;
  for (int step = 0; step < scene.T_sim * kSub; ++step) {
    Mat3 Iworld = mat_mul(mat_mul(R, Ibody), mat_transpose(R));
    Mat3 Iinv = invert3(Iworld);
    Vec3 F = {scene.mass * accel[0], scene.mass * accel[1], scene.mass * accel[2]};
    if (scene.gravity) F[2] -= scene.mass * 9.81;
    Vec3 tau{0, 0, 0};

    refresh_points(R);
    struct Contact {
      const Sphere* s;
      double pen;
      Vec3 rw, n;
    };
    std::vector<Contact> contacts;
    for (const auto& s : scene.hand_spheres) {
      Contact c;
      c.s = &s;
      c.pen = deepest(s, p, &c.rw, &c.n);
      if (c.pen > 0.0) contacts.push_back(c);
    }
    int n_active = static_cast<int>(contacts.size());

    for (const auto& c : contacts) {
      const Sphere& s = *c.s;
      double pen = c.pen;
      const Vec3& rw = c.rw;
      const Vec3& n = c.n;
      Vec3 vp = {v[0] + w[1] * rw[2] - w[2] * rw[1],
                 v[1] + w[2] * rw[0] - w[0] * rw[2],
                 v[2] + w[0] * rw[1] - w[1] * rw[0]};
      double vn = dot(vp, n);
      // cap the normal damper at its stopping force too (see the tangential
      // cap below): the rotational effective mass at the contact can make a
      // full explicit damping step overshoot and feed energy back in.
      double cn_eff = scene.c_n;
      {
        Vec3 rxn = cross(rw, n);
        Vec3 Irxn = mat_apply(Iinv, rxn);
        double meff_inv_n = 1.0 / scene.mass + dot(rxn, Irxn);
        double cn_stop = 1.0 / (dtp * meff_inv_n * n_active);
        if (cn_eff > cn_stop) cn_eff = cn_stop;
      }
      double fn = scene.k_n * pen - cn_eff * vn;
      if (fn < 0.0) fn = 0.0;  // non-adhesive
      Vec3 vt = {vp[0] - vn * n[0], vp[1] - vn * n[1], vp[2] - vn * n[2]};
      // the raw damper c_t * vt is explicitly integrated; for the rotational
      // degrees of freedom the effective mass at the contact point can be
      // tiny, so a step of full damping would overshoot and reverse the
      // tangential velocity. Cap the force at the stopping force (the force
      // that zeroes vt within one step, shared across active contacts).
      Vec3 ft{0, 0, 0};
      double vtn = norm(vt);
      if (vtn > 1e-15) {
        Vec3 tdir = {vt[0] / vtn, vt[1] / vtn, vt[2] / vtn};
        Vec3 rxt = cross(rw, tdir);
        Vec3 Irxt = mat_apply(Iinv, rxt);
        double meff_inv = 1.0 / scene.mass + dot(rxt, Irxt);
        double f = scene.c_t * vtn;
        double f_stop = vtn / (dtp * meff_inv * n_active);
        if (f > f_stop) f = f_stop;
        double cap = scene.mu * fn;
        if (f > cap) f = cap;
        ft = {-f * tdir[0], -f * tdir[1], -f * tdir[2]};
      }
      Vec3 fc = {fn * n[0] + ft[0], fn * n[1] + ft[1], fn * n[2] + ft[2]};
      F = {F[0] + fc[0], F[1] + fc[1], F[2] + fc[2]};
      Vec3 tq = cross(rw, fc);
      tau = {tau[0] + tq[0], tau[1] + tq[1], tau[2] + tq[2]};
      // soft-finger torsional friction: a finite contact patch resists spin
      // directly, which point forces at a single lever arm cannot model.
      // Coulomb form, mu * fn * patch radius: a load-proportional resistive
      // torque can hold the object still against the constant spurious torque
      // a sampled contact point exerts (its line of action misses the mass
      // center by up to the cloud spacing), where a viscous term would only
      // reach an equilibrium spin. Capped at the torque that stops the spin
      // within one step, shared across active contacts, so it brings the spin
      // to rest instead of chattering around it.
      double wn_now = norm(w);
      if (wn_now > 1e-15 && fn > 0.0) {
        Vec3 wdir = {w[0] / wn_now, w[1] / wn_now, w[2] / wn_now};
        Vec3 Iw = mat_apply(Iworld, w);
        double t_mag = scene.mu * fn * std::sqrt(pen * s.radius);
        double t_stop = norm(Iw) / (dtp * n_active);
        if (t_mag > t_stop) t_mag = t_stop;
        tau = {tau[0] - t_mag * wdir[0], tau[1] - t_mag * wdir[1],
               tau[2] - t_mag * wdir[2]};
      }
    }

    for (int i = 0; i < 3; ++i) v[i] += dtp * F[i] / scene.mass;
    Vec3 dw = mat_apply(Iinv, tau);
    for (int i = 0; i < 3; ++i) w[i] += dtp * dw[i];
    for (int i = 0; i < 3; ++i) p[i] += dtp * v[i];
    double wn = norm(w);
    if (wn > 0.0) R = mat_mul(axis_angle_to_matrix(w, wn * dtp), R);

    Vec3 disp = {p[0] - p_init[0], p[1] - p_init[1], p[2] - p_init[2]};
    out.max_displacement = std::max(out.max_displacement, norm(disp));
    if (keep_trace && (step + 1) % kSub == 0)
      out.trace.push_back({(step + 1) * dtp, p[0], p[1], p[2], v[0], v[1], v[2]});

    double ke = 0.5 * scene.mass * dot(v, v);
    Vec3 Iw = mat_apply(mat_mul(mat_mul(R, Ibody), mat_transpose(R)), w);
    ke += 0.5 * dot(w, Iw);
    if (ke > ke_bound)
      throw std::runtime_error("rollout: unstable integration (energy growth); reduce dt");
  }
  out.v_end = v;
  out.w_end = w;
  out.p_end = p;
  return out;
}

double stability_loss(const SimScene& scene, const std::vector<Vec3>& v0_set) {
  if (v0_set.empty()) throw std::invalid_argument("stability_loss: empty velocity set");
  double acc = 0.0;
  for (const auto& v0 : v0_set) {
    RolloutResult r = rollout(scene, v0);
    acc += dot(r.v_end, r.v_end) + dot(r.w_end, r.w_end);
  }
  return acc / static_cast<double>(v0_set.size());
}

double range_loss(const std::vector<double>& q, const std::vector<double>& q_low,
                  const std::vector<double>& q_up) {
  if (q.size() != q_low.size() || q.size() != q_up.size())
    throw std::invalid_argument("range_loss: length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < q.size(); ++i) {
    double d = q[i] - 0.5 * (q_up[i] + q_low[i]);
    acc += d * d;
  }
  return acc;
}

double limit_loss(const std::vector<double>& q, const std::vector<double>& q_low,
                  const std::vector<double>& q_up) {
  if (q.size() != q_low.size() || q.size() != q_up.size())
    throw std::invalid_argument("limit_loss: length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < q.size(); ++i)
    acc += std::max(q[i] - q_up[i], 0.0) + std::max(q_low[i] - q[i], 0.0);
  return acc;
}

namespace {

SimScene scene_for(const Grasp& g, const PhysContext& ctx) {
  SimScene s;
  s.obj_points = ctx.obj_points;
  s.mass = ctx.mass;
  s.hand_spheres = forward_kinematics(ctx.hand, g);
  s.k_n = ctx.k_n;
  s.c_n = ctx.c_n;
  s.c_t = ctx.c_t;
  s.mu = ctx.mu;
  s.dt = ctx.dt;
  s.T_sim = ctx.T_sim;
  return s;
}

double stability_of(const Grasp& g, const PhysContext& ctx) {
  // a grasp whose rollout blows up is simply a very bad grasp
  try {
    return stability_loss(scene_for(g, ctx), default_velocity_set(ctx.v0_speed));
  } catch (const std::runtime_error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

double phys_loss_value(const Grasp& g, const PhysContext& ctx) {
  auto lo = ctx.hand.joint_lower();
  auto up = ctx.hand.joint_upper();
  return stability_of(g, ctx) + ctx.alpha1 * range_loss(g.q, lo, up) +
         ctx.alpha2 * limit_loss(g.q, lo, up);
}

PhysLossResult phys_loss(const Grasp& g, const PhysContext& ctx, bool with_grad) {
  auto lo = ctx.hand.joint_lower();
  auto up = ctx.hand.joint_upper();
  PhysLossResult out;
  out.stability = stability_of(g, ctx);
  out.range = range_loss(g.q, lo, up);
  out.limit = limit_loss(g.q, lo, up);
  out.total = out.stability + ctx.alpha1 * out.range + ctx.alpha2 * out.limit;
  if (!with_grad) return out;

  int k = static_cast<int>(g.q.size());
  out.grad.assign(static_cast<size_t>(9 + k), 0.0);

  // analytic gradients of the joint-limit terms
  for (int j = 0; j < k; ++j) {
    double mid = 0.5 * (up[static_cast<size_t>(j)] + lo[static_cast<size_t>(j)]);
    double gq = ctx.alpha1 * 2.0 * (g.q[static_cast<size_t>(j)] - mid);
    if (g.q[static_cast<size_t>(j)] > up[static_cast<size_t>(j)]) gq += ctx.alpha2;
    if (g.q[static_cast<size_t>(j)] < lo[static_cast<size_t>(j)]) gq -= ctx.alpha2;
    out.grad[static_cast<size_t>(9 + j)] = gq;
  }

  // stability gradient by central finite differences over all coordinates
  std::vector<double> flat = g.flat();
  for (size_t i = 0; i < flat.size(); ++i) {
    double keep = flat[i];
    flat[i] = keep + ctx.fd_step;
    double fp = stability_of(Grasp::from_flat(flat, k), ctx);
    flat[i] = keep - ctx.fd_step;
    double fm = stability_of(Grasp::from_flat(flat, k), ctx);
    flat[i] = keep;
    out.grad[i] += (fp - fm) / (2.0 * ctx.fd_step);
  }
  return out;
}

SuccessReport success_eval(const Grasp& g, const std::vector<Vec3>& obj_points,
                           const HandSpec& hand, const PhysContext& ctx) {
  PhysContext c = ctx;
  c.obj_points = obj_points;
  c.hand = hand;
  SimScene scene = scene_for(g, c);
  scene.T_sim = 60;
  SuccessReport rep;
  rep.pass = true;
  const auto dirs = default_velocity_set(1.0);
  for (size_t i = 0; i < 6; ++i) {
    double disp;
    try {
      RolloutResult r = rollout(scene, {0, 0, 0}, {0, 0, 0},
                                {0.5 * dirs[i][0], 0.5 * dirs[i][1], 0.5 * dirs[i][2]});
      disp = r.max_displacement;
    } catch (const std::runtime_error&) {
      disp = std::numeric_limits<double>::infinity();
    }
    rep.displacement[i] = disp;
    if (disp >= 0.02) rep.pass = false;
  }
  return rep;
}

double diversity_score(const std::vector<Grasp>& grasps) {
  if (grasps.size() < 2) throw std::invalid_argument("diversity_score: need >= 2 grasps");
  size_t k = grasps[0].q.size();
  double acc = 0.0;
  for (size_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (const auto& g : grasps) mean += g.q[j];
    mean /= static_cast<double>(grasps.size());
    double var = 0.0;
    for (const auto& g : grasps) {
      double d = g.q[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(grasps.size());
    acc += std::sqrt(var);
  }
  return acc / static_cast<double>(k);
}

}  // namespace gagrasp

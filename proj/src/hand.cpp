#include "gagrasp/hand.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gagrasp {

std::vector<double> Grasp::flat() const {
  std::vector<double> v;
  v.reserve(9 + q.size());
  v.insert(v.end(), r.begin(), r.end());
  v.insert(v.end(), p.begin(), p.end());
  v.insert(v.end(), q.begin(), q.end());
  return v;
}

Grasp Grasp::from_flat(const std::vector<double>& v, int joint_dim) {
  if (v.size() != static_cast<size_t>(9 + joint_dim))
    throw std::invalid_argument("Grasp::from_flat: wrong length");
  Grasp g;
  for (int i = 0; i < 6; ++i) g.r[static_cast<size_t>(i)] = v[static_cast<size_t>(i)];
  for (int i = 0; i < 3; ++i) g.p[static_cast<size_t>(i)] = v[static_cast<size_t>(6 + i)];
  g.q.assign(v.begin() + 9, v.end());
  return g;
}

int HandSpec::joint_count() const {
  int n = 0;
  for (const auto& f : fingers) n += static_cast<int>(f.joints.size());
  return n;
}

int HandSpec::sphere_count() const {
  int n = static_cast<int>(palm_spheres.size());
  for (const auto& f : fingers)
    for (const auto& ls : f.link_spheres) n += static_cast<int>(ls.size());
  return n;
}

std::vector<double> HandSpec::joint_lower() const {
  std::vector<double> v;
  for (const auto& f : fingers)
    for (const auto& j : f.joints) v.push_back(j.q_low);
  return v;
}

std::vector<double> HandSpec::joint_upper() const {
  std::vector<double> v;
  for (const auto& f : fingers)
    for (const auto& j : f.joints) v.push_back(j.q_up);
  return v;
}

HandSpec toy_hand(int k_fingers, int joints_per_finger) {
  if (k_fingers < 2) throw std::invalid_argument("toy_hand: k_fingers must be >= 2");
  if (joints_per_finger < 1)
    throw std::invalid_argument("toy_hand: joints_per_finger must be >= 1");

  constexpr double kPalmWidth = 0.04;
  constexpr double kPhalanx = 0.02;
  constexpr double kRadius = 0.006;

  HandSpec spec;
  for (int i = 0; i < 3; ++i) {
    double x = -kPalmWidth / 2 + kPalmWidth * i / 2.0;
    spec.palm_spheres.push_back({{x, 0.0, 0.0}, kRadius});
  }

  for (int f = 0; f < k_fingers; ++f) {
    double x = -kPalmWidth / 2 + kPalmWidth * f / (k_fingers - 1);
    // positive q curls the finger toward the palm center line
    double curl = (x > 0.0) ? -1.0 : 1.0;
    if (x == 0.0) curl = -1.0;
    FingerSpec finger;
    for (int j = 0; j < joints_per_finger; ++j) {
      JointSpec js;
      js.axis = {0.0, curl, 0.0};
      js.origin = (j == 0) ? Vec3{x, 0.0, 0.0} : Vec3{0.0, 0.0, kPhalanx};
      js.q_low = 0.0;
      js.q_up = M_PI / 2.0;
      finger.joints.push_back(js);
      finger.link_spheres.push_back(
          {{{0.0, 0.0, kPhalanx / 2}, kRadius}, {{0.0, 0.0, kPhalanx}, kRadius}});
    }
    spec.fingers.push_back(std::move(finger));
  }
  return spec;
}

std::vector<Sphere> forward_kinematics(const HandSpec& spec, const Grasp& g) {
  if (g.q.size() != static_cast<size_t>(spec.joint_count()))
    throw std::invalid_argument("forward_kinematics: joint vector length mismatch");
  Mat3 Rb = rot6d_decode(g.r);
  std::vector<Sphere> out;
  out.reserve(static_cast<size_t>(spec.sphere_count()));
  for (const auto& s : spec.palm_spheres) {
    out.push_back({
        {mat_apply(Rb, s.center)[0] + g.p[0], mat_apply(Rb, s.center)[1] + g.p[1],
         mat_apply(Rb, s.center)[2] + g.p[2]},
        s.radius});
  }
  size_t qi = 0;
  for (const auto& f : spec.fingers) {
    Mat3 R = Rb;
    Vec3 t = g.p;
    for (size_t j = 0; j < f.joints.size(); ++j) {
      const JointSpec& js = f.joints[j];
      Vec3 o = mat_apply(R, js.origin);
      t = {t[0] + o[0], t[1] + o[1], t[2] + o[2]};
      R = mat_mul(R, axis_angle_to_matrix(js.axis, g.q[qi++]));
      for (const auto& s : f.link_spheres[j]) {
        Vec3 c = mat_apply(R, s.center);
        out.push_back({{c[0] + t[0], c[1] + t[1], c[2] + t[2]}, s.radius});
      }
    }
  }
  return out;
}

namespace {
void emit_vec(std::ostream& os, const Vec3& v) { os << v[0] << " " << v[1] << " " << v[2]; }
Vec3 read_vec(std::istream& is) {
  Vec3 v;
  is >> v[0] >> v[1] >> v[2];
  return v;
}
}  // namespace

std::string hand_spec_to_text(const HandSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  os << "hand_spec v1\n";
  os << "palm_spheres " << spec.palm_spheres.size() << "\n";
  for (const auto& s : spec.palm_spheres) {
    os << "sphere ";
    emit_vec(os, s.center);
    os << " " << s.radius << "\n";
  }
  os << "fingers " << spec.fingers.size() << "\n";
  for (const auto& f : spec.fingers) {
    os << "finger joints " << f.joints.size() << "\n";
    for (size_t j = 0; j < f.joints.size(); ++j) {
      const JointSpec& js = f.joints[j];
      os << "joint axis ";
      emit_vec(os, js.axis);
      os << " origin ";
      emit_vec(os, js.origin);
      os << " limits " << js.q_low << " " << js.q_up << "\n";
      os << "link_spheres " << f.link_spheres[j].size() << "\n";
      for (const auto& s : f.link_spheres[j]) {
        os << "sphere ";
        emit_vec(os, s.center);
        os << " " << s.radius << "\n";
      }
    }
  }
  return os.str();
}

HandSpec hand_spec_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string tok;
  is >> tok;
  if (tok != "hand_spec") throw std::invalid_argument("hand_spec_from_text: bad header");
  is >> tok;  // version
  HandSpec spec;
  size_t n;
  is >> tok >> n;
  for (size_t i = 0; i < n; ++i) {
    is >> tok;
    Sphere s;
    s.center = read_vec(is);
    is >> s.radius;
    spec.palm_spheres.push_back(s);
  }
  size_t nf;
  is >> tok >> nf;
  for (size_t f = 0; f < nf; ++f) {
    std::string a, b;
    size_t nj;
    is >> a >> b >> nj;
    FingerSpec finger;
    for (size_t j = 0; j < nj; ++j) {
      JointSpec js;
      is >> tok >> tok;
      js.axis = read_vec(is);
      is >> tok;
      js.origin = read_vec(is);
      is >> tok >> js.q_low >> js.q_up;
      finger.joints.push_back(js);
      size_t ns;
      is >> tok >> ns;
      std::vector<Sphere> spheres;
      for (size_t k = 0; k < ns; ++k) {
        is >> tok;
        Sphere s;
        s.center = read_vec(is);
        is >> s.radius;
        spheres.push_back(s);
      }
      finger.link_spheres.push_back(std::move(spheres));
    }
    spec.fingers.push_back(std::move(finger));
  }
  if (!is) throw std::invalid_argument("hand_spec_from_text: truncated document");
  return spec;
}

}  // namespace gagrasp

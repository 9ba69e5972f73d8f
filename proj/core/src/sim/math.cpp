#include "atr/sim/math.hpp"

#include <algorithm>

namespace atr::sim {

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  return r;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Mat3 euler_to_rot(const EulerXYZ& e) {
  return rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll);
}

EulerXYZ rot_to_euler(const Mat3& r) {
  // r(2,0) = -sin(pitch); r(2,1) = cos(pitch) sin(roll); r(1,0) = sin(yaw) cos(pitch)
  EulerXYZ e;
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  e.pitch = std::asin(sp);
  e.roll = std::atan2(r(2, 1), r(2, 2));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  return e;
}

Mat3 euler_rate_to_body(const EulerXYZ& e) {
  const double cr = std::cos(e.roll), sr = std::sin(e.roll);
  const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
  Mat3 m;
  m << 1.0, 0.0, -sp,
       0.0, cr, sr * cp,
       0.0, -sr, cr * cp;
  return m;
}

Mat3 body_to_euler_rate(const EulerXYZ& e) {
  const double cr = std::cos(e.roll), sr = std::sin(e.roll);
  const double cp = std::cos(e.pitch), sp = std::sin(e.pitch);
  const double tp = sp / cp;
  Mat3 m;
  m << 1.0, sr * tp, cr * tp,
       0.0, cr, -sr,
       0.0, sr / cp, cr / cp;
  return m;
}

Mat3 euler_rate_to_world(const EulerXYZ& e) {
  return euler_to_rot(e) * euler_rate_to_body(e);
}

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

}  // namespace atr::sim

#include "wmsynth/kinematics/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wmsynth::kinematics {

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  const Mat3 err = r.transpose() * r - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Rotation6D rot6d_from_matrix(const Mat3& r, double tol) {
  if (!is_rotation(r, tol)) {
    throw RotationError("rot6d_from_matrix: input is not orthonormal with det +1 (tolerance " +
                        std::to_string(tol) + ")");
  }
  Rotation6D out;
  for (int i = 0; i < 3; ++i) {
    out[static_cast<std::size_t>(i)] = r(i, 0);
    out[static_cast<std::size_t>(i) + 3] = r(i, 1);
  }
  return out;
}

Mat3 matrix_from_rot6d(const Rotation6D& r, double min_angle) {
  const Vec3 a1 = r.first();
  const Vec3 a2 = r.second();
  if (!a1.allFinite() || !a2.allFinite()) throw RotationError("matrix_from_rot6d: non-finite input");
  const double n1 = a1.norm(), n2 = a2.norm();
  if (n1 == 0.0 || n2 == 0.0) {
    throw RotationError("matrix_from_rot6d: ill-conditioned input, a column has zero length");
  }
  const double sin_angle = a1.cross(a2).norm() / (n1 * n2);
  if (sin_angle <= std::sin(min_angle)) {
    throw RotationError("matrix_from_rot6d: ill-conditioned input, columns are parallel within " +
                        std::to_string(min_angle) + " rad");
  }
  const Vec3 b1 = a1 / n1;
  const Vec3 b2 = (a2 - b1.dot(a2) * b1).normalized();
  const Vec3 b3 = b1.cross(b2);
  Mat3 out;
  out.col(0) = b1;
  out.col(1) = b2;
  out.col(2) = b3;
  return out;
}

Mat3 rotation_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rotation_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rotation_z(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(); }

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace wmsynth::kinematics

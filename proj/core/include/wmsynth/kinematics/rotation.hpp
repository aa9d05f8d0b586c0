#pragma once

#include <array>
#include <stdexcept>

#include <Eigen/Dense>

namespace wmsynth::kinematics {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class RotationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// First two columns of a rotation matrix, concatenated column-major:
// [R00, R10, R20, R01, R11, R21].
struct Rotation6D {
  std::array<double, 6> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  Vec3 first() const { return {values[0], values[1], values[2]}; }
  Vec3 second() const { return {values[3], values[4], values[5]}; }
  bool operator==(const Rotation6D&) const = default;
};

// Max |R^T R - I| and |det R - 1| both within tol.
bool is_rotation(const Mat3& r, double tol = 1e-6);

// Throws RotationError when r is not a proper rotation within tol.
Rotation6D rot6d_from_matrix(const Mat3& r, double tol = 1e-6);

// Gram-Schmidt reconstruction: b1 = a1/|a1|, b2 = normalize(a2 - (b1.a2) b1),
// b3 = b1 x b2. Throws RotationError when the two columns are within
// `min_angle` radians of parallel (or either is zero).
Mat3 matrix_from_rot6d(const Rotation6D& r, double min_angle = 1e-6);

Mat3 rotation_x(double angle);
Mat3 rotation_y(double angle);
Mat3 rotation_z(double angle);

// Geodesic angle between two rotations.
double rotation_angle_between(const Mat3& a, const Mat3& b);

}  // namespace wmsynth::kinematics

#include "wmsynth/kinematics/action.hpp"

#include <stdexcept>
#include <string>

namespace wmsynth::kinematics {

namespace {

constexpr std::array<std::size_t, 6> kCartesian = {0, 1, 2, 10, 11, 12};
constexpr std::array<std::size_t, 12> kRotation = {3, 4, 5, 6, 7, 8, 13, 14, 15, 16, 17, 18};
constexpr std::array<std::size_t, 2> kJaw = {9, 19};

void write_arm(ActionVector& a, std::size_t pos, std::size_t rot, std::size_t jaw, const ArmCommand& c) {
  for (std::size_t i = 0; i < 3; ++i) a[pos + i] = c.position[static_cast<int>(i)];
  for (std::size_t i = 0; i < 6; ++i) a[rot + i] = c.rotation[i];
  a[jaw] = c.jaw;
}

ArmCommand read_arm(const ActionVector& a, std::size_t pos, std::size_t rot, std::size_t jaw) {
  ArmCommand c;
  c.position = Vec3(a[pos], a[pos + 1], a[pos + 2]);
  for (std::size_t i = 0; i < 6; ++i) c.rotation[i] = a[rot + i];
  c.jaw = a[jaw];
  return c;
}

void check_length(std::span<const double> s, std::size_t n, const char* what) {
  if (s.size() != n) {
    throw std::invalid_argument(std::string("pack_action: ") + what + " has " + std::to_string(s.size()) +
                                " entries, expected " + std::to_string(n));
  }
}

}  // namespace

ActionVector pack_action(const ArmCommand& left, const ArmCommand& right) {
  ActionVector a{};
  write_arm(a, layout::kLeftPosition, layout::kLeftRotation, layout::kLeftJaw, left);
  write_arm(a, layout::kRightPosition, layout::kRightRotation, layout::kRightJaw, right);
  return a;
}

std::pair<ArmCommand, ArmCommand> unpack_action(const ActionVector& a) {
  return {read_arm(a, layout::kLeftPosition, layout::kLeftRotation, layout::kLeftJaw),
          read_arm(a, layout::kRightPosition, layout::kRightRotation, layout::kRightJaw)};
}

ActionVector pack_action(std::span<const double> p_left, std::span<const double> r_left, double g_left,
                         std::span<const double> p_right, std::span<const double> r_right, double g_right) {
  check_length(p_left, 3, "p_L");
  check_length(r_left, 6, "r_L");
  check_length(p_right, 3, "p_R");
  check_length(r_right, 6, "r_R");
  ActionVector a{};
  std::copy(p_left.begin(), p_left.end(), a.begin() + layout::kLeftPosition);
  std::copy(r_left.begin(), r_left.end(), a.begin() + layout::kLeftRotation);
  a[layout::kLeftJaw] = g_left;
  std::copy(p_right.begin(), p_right.end(), a.begin() + layout::kRightPosition);
  std::copy(r_right.begin(), r_right.end(), a.begin() + layout::kRightRotation);
  a[layout::kRightJaw] = g_right;
  return a;
}

std::span<const std::size_t> component_indices(Component c) {
  switch (c) {
    case Component::kCartesian: return kCartesian;
    case Component::kRotation: return kRotation;
    case Component::kJaw: return kJaw;
  }
  throw std::invalid_argument("unknown component");
}

const char* component_name(Component c) {
  switch (c) {
    case Component::kCartesian: return "cartesian";
    case Component::kRotation: return "rotation";
    case Component::kJaw: return "jaw";
  }
  return "?";
}

bool rotations_decodable(const ActionVector& a) {
  try {
    auto [l, r] = unpack_action(a);
    matrix_from_rot6d(l.rotation);
    matrix_from_rot6d(r.rotation);
    return true;
  } catch (const RotationError&) {
    return false;
  }
}

ActionVector reorthonormalize(const ActionVector& a) {
  auto [l, r] = unpack_action(a);
  l.rotation = rot6d_from_matrix(matrix_from_rot6d(l.rotation));
  r.rotation = rot6d_from_matrix(matrix_from_rot6d(r.rotation));
  return pack_action(l, r);
}

ActionVector to_float_precision(const ActionVector& a) {
  ActionVector out;
  for (std::size_t i = 0; i < kActionDim; ++i) out[i] = static_cast<double>(static_cast<float>(a[i]));
  return out;
}

}  // namespace wmsynth::kinematics

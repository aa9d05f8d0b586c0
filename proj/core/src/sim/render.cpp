#include "wmsynth/sim/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace wmsynth::sim {

namespace {

constexpr double kShaftLength = 0.05;
constexpr double kJawLength = 0.012;
constexpr double kShaftHalfWidth = 1.1;  // pixels
constexpr double kJawHalfWidth = 0.6;
constexpr double kNeedleHalfWidth = 1.0;
constexpr int kNeedleSegments = 24;
// Pad rectangle in camera x/y.
constexpr double kPadXMin = -0.06, kPadXMax = 0.06, kPadYMin = -0.03, kPadYMax = 0.05;

Color shaded(const Color& c, double depth) {
  const double k = std::clamp(1.0 - 5.0 * depth, 0.6, 1.4);
  Color out;
  for (std::size_t i = 0; i < 3; ++i) out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(c[i] * k), 0L, 255L));
  return out;
}

void put(Frame& f, std::size_t r, std::size_t c, const Color& col) {
  std::uint8_t* px = f.at(r, c);
  for (std::size_t i = 0; i < 3 && i < f.geometry.channels; ++i) px[i] = col[i];
}

// Paints pixels whose center lies within half_width of segment a-b (pixel coords).
void draw_segment(Frame& f, std::array<double, 2> a, std::array<double, 2> b, double half_width, const Color& col) {
  const double x0 = std::min(a[0], b[0]) - half_width, x1 = std::max(a[0], b[0]) + half_width;
  const double y0 = std::min(a[1], b[1]) - half_width, y1 = std::max(a[1], b[1]) + half_width;
  const long cmin = std::max(0L, static_cast<long>(std::floor(x0)));
  const long cmax = std::min(static_cast<long>(f.geometry.width) - 1, static_cast<long>(std::ceil(x1)));
  const long rmin = std::max(0L, static_cast<long>(std::floor(y0)));
  const long rmax = std::min(static_cast<long>(f.geometry.height) - 1, static_cast<long>(std::ceil(y1)));
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  for (long r = rmin; r <= rmax; ++r) {
    for (long c = cmin; c <= cmax; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      double t = len2 > 0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = a[0] + t * dx - px, ey = a[1] + t * dy - py;
      if (ex * ex + ey * ey <= half_width * half_width) put(f, static_cast<std::size_t>(r), static_cast<std::size_t>(c), col);
    }
  }
}

void draw_arm(Frame& f, const ArmState& arm, const Color& shaft, const Color& jaw, const SimConfig& cfg) {
  const FrameGeometry& g = f.geometry;
  Vec3 axis = arm.rotation.col(0);
  Eigen::Vector2d dir(axis[0], axis[1]);
  if (dir.norm() < 1e-9) dir = Eigen::Vector2d(1.0, 0.0);
  dir.normalize();
  const Vec3& tip = arm.position;
  const auto tip_px = project(tip, g, cfg);
  const Vec3 back = tip - kShaftLength * Vec3(dir[0], dir[1], 0.0);
  draw_segment(f, project(back, g, cfg), tip_px, kShaftHalfWidth, shaded(shaft, tip[2]));
  const double half = arm.jaw / 2.0;
  for (double sgn : {-1.0, 1.0}) {
    const double c = std::cos(sgn * half), s = std::sin(sgn * half);
    const Eigen::Vector2d d(c * dir[0] - s * dir[1], s * dir[0] + c * dir[1]);
    const Vec3 end = tip + kJawLength * Vec3(d[0], d[1], 0.0);
    draw_segment(f, tip_px, project(end, g, cfg), kJawHalfWidth, shaded(jaw, tip[2]));
  }
}

}  // namespace

std::array<double, 2> project(const Vec3& p, const FrameGeometry& g, const SimConfig& cfg) {
  const double span = 2.0 * cfg.workspace_half;
  return {(p[0] + cfg.workspace_half) / span * static_cast<double>(g.width),
          (p[1] + cfg.workspace_half) / span * static_cast<double>(g.height)};
}

Frame render(const SimState& s, const FrameGeometry& g, const SimConfig& cfg) {
  static const Palette pal;
  Frame f(g);
  const auto pad_lo = project(Vec3(kPadXMin, kPadYMin, 0), g, cfg);
  const auto pad_hi = project(Vec3(kPadXMax, kPadYMax, 0), g, cfg);
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      const double px = c + 0.5, py = r + 0.5;
      const bool on_pad = px >= pad_lo[0] && px < pad_hi[0] && py >= pad_lo[1] && py < pad_hi[1];
      put(f, r, c, on_pad ? pal.pad : pal.tissue);
    }
  }
  draw_arm(f, s.right, pal.right_shaft, pal.right_jaw, cfg);
  draw_arm(f, s.left, pal.left_shaft, pal.left_jaw, cfg);
  std::array<double, 2> prev{};
  for (int i = 0; i <= kNeedleSegments; ++i) {
    const double angle = std::numbers::pi * i / kNeedleSegments;
    const auto p = project(s.needle_position + s.needle_rotation * needle_local_point(angle, cfg), g, cfg);
    if (i > 0) draw_segment(f, prev, p, kNeedleHalfWidth, pal.needle);
    prev = p;
  }
  return f;
}

std::size_t count_color(const Frame& f, const Color& col) {
  std::size_t n = 0;
  for (std::size_t r = 0; r < f.geometry.height; ++r)
    for (std::size_t c = 0; c < f.geometry.width; ++c) {
      const auto* px = f.at(r, c);
      if (px[0] == col[0] && px[1] == col[1] && px[2] == col[2]) ++n;
    }
  return n;
}

std::array<double, 2> color_centroid(const Frame& f, const Color& col) {
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < f.geometry.height; ++r)
    for (std::size_t c = 0; c < f.geometry.width; ++c) {
      const auto* px = f.at(r, c);
      if (px[0] == col[0] && px[1] == col[1] && px[2] == col[2]) {
        sx += c + 0.5;
        sy += r + 0.5;
        ++n;
      }
    }
  if (n == 0) return {std::nan(""), std::nan("")};
  return {sx / n, sy / n};
}

}  // namespace wmsynth::sim

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wmsynth/sim/sim.hpp"

namespace wmsynth::sim {

struct FrameGeometry {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 3;

  std::size_t bytes() const { return height * width * channels; }
  bool operator==(const FrameGeometry&) const = default;
};

// 8-bit image, row-major HxWxC.
struct Frame {
  FrameGeometry geometry;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  explicit Frame(FrameGeometry g) : geometry(g), pixels(g.bytes(), 0) {}
  std::uint8_t* at(std::size_t row, std::size_t col) { return &pixels[(row * geometry.width + col) * geometry.channels]; }
  const std::uint8_t* at(std::size_t row, std::size_t col) const {
    return &pixels[(row * geometry.width + col) * geometry.channels];
  }
  bool operator==(const Frame&) const = default;
};

using Color = std::array<std::uint8_t, 3>;

struct Palette {
  Color tissue{150, 70, 70};
  Color pad{205, 160, 140};
  Color needle{240, 240, 250};
  Color left_shaft{40, 160, 60};
  Color left_jaw{170, 230, 60};
  Color right_shaft{50, 80, 200};
  Color right_jaw{60, 200, 230};
};

// Orthographic projection onto the image plane: returns (column, row) in
// continuous pixel coordinates; pixel (r, c) covers [c, c+1) x [r, r+1).
std::array<double, 2> project(const Vec3& p, const FrameGeometry& g, const SimConfig& cfg = {});

// Flat-shaded rendering: tissue, pad, instruments (shaft + two jaw prongs,
// brightness scaled by depth), needle arc on top.
Frame render(const SimState& s, const FrameGeometry& g = {}, const SimConfig& cfg = {});

// Pixels with exactly the needle color, and their centroid (column, row).
std::size_t count_color(const Frame& f, const Color& c);
std::array<double, 2> color_centroid(const Frame& f, const Color& c);

}  // namespace wmsynth::sim

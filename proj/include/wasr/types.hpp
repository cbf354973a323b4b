#pragma once

#include <cstdint>
#include <vector>

#include "wasr/error.hpp"

namespace wasr {

enum class Label : std::uint8_t { water = 0, sky = 1, obstacle = 2, unknown = 255 };

constexpr bool is_valid_label(std::uint8_t v) { return v == 0 || v == 1 || v == 2 || v == 255; }

/// Row-major 2D grid.
template <class T>
struct Grid {
  int height = 0;
  int width = 0;
  std::vector<T> cells;

  Grid() = default;
  Grid(int h, int w, T fill = T{}) : height(h), width(w), cells(static_cast<std::size_t>(h) * w, fill) {
    if (h < 0 || w < 0) throw ContractError("grid dimensions must be non-negative");
  }

  T& operator()(int r, int c) { return cells[static_cast<std::size_t>(r) * width + c]; }
  const T& operator()(int r, int c) const { return cells[static_cast<std::size_t>(r) * width + c]; }
  bool in_bounds(int r, int c) const { return r >= 0 && r < height && c >= 0 && c < width; }
  std::size_t size() const { return cells.size(); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Per-pixel ground truth or prediction over {water, sky, obstacle, unknown}.
using SegLabelMap = Grid<Label>;

/// 0/1 mask.
using BinaryGrid = Grid<std::uint8_t>;

/// Planar RGB image, values in [0,1], layout [channel][row][col].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // 3 * height * width

  Image() = default;
  Image(int h, int w, double fill = 0.0) : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {}

  double& at(int ch, int r, int c) { return data[(static_cast<std::size_t>(ch) * height + r) * width + c]; }
  double at(int ch, int r, int c) const { return data[(static_cast<std::size_t>(ch) * height + r) * width + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Inclusive pixel-coordinate box.
struct Box {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  int width() const { return x2 - x1 + 1; }
  int height() const { return y2 - y1 + 1; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  friend bool operator==(const Box&, const Box&) = default;
};

struct Point {
  double x = 0.0, y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Polyline = std::vector<Point>;

}  // namespace wasr

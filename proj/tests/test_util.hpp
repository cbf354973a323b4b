#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <span>
#include <string>
#include <vector>

#include "wasr/rng.hpp"
#include "wasr/tensor.hpp"
#include "wasr/types.hpp"

namespace wasr::test {

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v), requires_grad);
}

inline std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("wasr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Brute-force flood fill: components as sorted pixel lists, ordered by size
/// descending then by first pixel.
inline std::vector<std::vector<std::int64_t>> flood_fill_components(const BinaryGrid& mask, int connectivity) {
  const int h = mask.height, w = mask.width;
  std::vector<int> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<std::vector<std::int64_t>> out;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (!mask(r0, c0) || seen[static_cast<std::size_t>(r0 * w + c0)]) continue;
      std::vector<std::int64_t> comp;
      std::vector<std::pair<int, int>> stack{{r0, c0}};
      seen[static_cast<std::size_t>(r0 * w + c0)] = 1;
      while (!stack.empty()) {
        const auto [r, c] = stack.back();
        stack.pop_back();
        comp.push_back(static_cast<std::int64_t>(r) * w + c);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if ((dr == 0 && dc == 0) || (connectivity == 4 && dr != 0 && dc != 0)) continue;
            const int nr = r + dr, nc = c + dc;
            if (nr < 0 || nr >= h || nc < 0 || nc >= w || !mask(nr, nc)) continue;
            if (seen[static_cast<std::size_t>(nr * w + nc)]) continue;
            seen[static_cast<std::size_t>(nr * w + nc)] = 1;
            stack.push_back({nr, nc});
          }
        }
      }
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

inline BinaryGrid random_mask(int h, int w, double density, std::uint64_t seed) {
  Rng rng(seed);
  BinaryGrid m(h, w);
  for (auto& v : m.cells) v = rng.uniform(0, 1) < density ? 1 : 0;
  return m;
}

inline SegLabelMap labels_from(const std::vector<std::string>& rows) {
  SegLabelMap m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      m(r, c) = ch == 'w' ? Label::water : ch == 's' ? Label::sky : ch == 'o' ? Label::obstacle : Label::unknown;
    }
  }
  return m;
}

}  // namespace wasr::test

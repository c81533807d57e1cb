#pragma once

#include <map>
#include <random>
#include <stack>
#include <vector>

#include "tender/image.hpp"

namespace tender::testing {

using image::BinaryImage;

inline BinaryImage random_binary(std::mt19937& gen, int w, int h, double density) {
  std::bernoulli_distribution d(density);
  BinaryImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, d(gen));
  return img;
}

// Stack-based flood fill; labels in raster order of first pixel.
inline std::vector<int> flood_fill_oracle(const BinaryImage& img, int conn) {
  const int w = img.width(), h = img.height();
  std::vector<int> lab(static_cast<std::size_t>(w) * h, 0);
  int next = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (!img.at(x0, y0) || lab[y0 * w + x0]) continue;
      ++next;
      std::stack<std::pair<int, int>> st;
      st.push({x0, y0});
      lab[y0 * w + x0] = next;
      while (!st.empty()) {
        auto [x, y] = st.top();
        st.pop();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (conn == 4 && dx != 0 && dy != 0) continue;
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!img.at(nx, ny) || lab[ny * w + nx]) continue;
            lab[ny * w + nx] = next;
            st.push({nx, ny});
          }
        }
      }
    }
  }
  return lab;
}

// Same partition iff the label correspondence is a bijection.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] == 0)) return false;
    if (a[i] == 0) continue;
    auto [ia, inserted_a] = ab.emplace(a[i], b[i]);
    auto [ib, inserted_b] = ba.emplace(b[i], a[i]);
    if (ia->second != b[i] || ib->second != a[i]) return false;
  }
  return true;
}

}  // namespace tender::testing

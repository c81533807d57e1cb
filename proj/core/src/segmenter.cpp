#include "tender/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace tender::seg {

namespace {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

LabelMap connected_components(const BinaryImage& img, int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw Error(ErrorCode::ShapeMismatch, "connectivity must be 4 or 8");
  }
  const int w = img.width();
  const int h = img.height();
  LabelMap map;
  map.width = w;
  map.height = h;
  map.labels.assign(static_cast<std::size_t>(w) * h, 0);

  // Pass 1: provisional labels (1-based; 0 reserved for background).
  DisjointSet sets;
  sets.make();
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!img.at(x, y)) continue;
      int label = 0;
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w) return;
        const int n = map.labels[idx(nx, ny)];
        if (n == 0) return;
        if (label == 0) {
          label = n;
        } else {
          sets.unite(label, n);
        }
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (connectivity == 8) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      map.labels[idx(x, y)] = label != 0 ? label : sets.make();
    }
  }

  // Pass 2: gather statistics per root.
  struct Stats {
    int min_x, min_y, max_x, max_y;
    long long area;
    std::size_t first;
  };
  std::vector<int> root_slot;
  std::vector<Stats> stats;
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    int& l = map.labels[i];
    if (l == 0) continue;
    const int root = sets.find(l);
    if (static_cast<std::size_t>(root) >= root_slot.size()) root_slot.resize(root + 1, -1);
    if (root_slot[root] < 0) {
      root_slot[root] = static_cast<int>(stats.size());
      stats.push_back({w, h, -1, -1, 0, i});
    }
    const int slot = root_slot[root];
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    Stats& s = stats[slot];
    s.min_x = std::min(s.min_x, x);
    s.min_y = std::min(s.min_y, y);
    s.max_x = std::max(s.max_x, x);
    s.max_y = std::max(s.max_y, y);
    ++s.area;
    l = slot + 1;
  }

  std::vector<int> order(stats.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::tie(stats[a].min_y, stats[a].min_x, stats[a].first) <
           std::tie(stats[b].min_y, stats[b].min_x, stats[b].first);
  });
  std::vector<int> relabel(stats.size() + 1, 0);
  map.components.reserve(stats.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Stats& s = stats[order[rank]];
    relabel[order[rank] + 1] = static_cast<int>(rank) + 1;
    map.components.push_back({static_cast<int>(rank) + 1,
                              BBox{s.min_x, s.min_y, s.max_x - s.min_x + 1, s.max_y - s.min_y + 1},
                              s.area});
  }
  for (int& l : map.labels) l = relabel[l];
  return map;
}

double border_coverage(const LabelMap& map, const Component& comp) {
  const BBox& b = comp.bbox;
  long long ring = 0;
  long long hit = 0;
  auto check = [&](int x, int y) {
    ++ring;
    if (map.at(x, y) == comp.label) ++hit;
  };
  for (int x = b.x; x < b.right(); ++x) {
    check(x, b.y);
    if (b.h > 1) check(x, b.bottom() - 1);
  }
  for (int y = b.y + 1; y < b.bottom() - 1; ++y) {
    check(b.x, y);
    if (b.w > 1) check(b.right() - 1, y);
  }
  return ring > 0 ? static_cast<double>(hit) / static_cast<double>(ring) : 0.0;
}

int SegmentationParams::resolved_min_w(int page_w) const {
  return min_w ? *min_w : std::max(1, static_cast<int>(std::lround(0.05 * page_w)));
}

int SegmentationParams::resolved_min_h(int page_w) const {
  return min_h ? *min_h : std::max(1, static_cast<int>(std::lround(0.05 * page_w)));
}

void SegmentationParams::validate() const {
  if (!(max_frac > 0.0 && max_frac <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "max_frac must lie in (0, 1]");
  }
  if ((min_w && *min_w < 1) || (min_h && *min_h < 1)) {
    throw Error(ErrorCode::ConfigError, "min_w and min_h must be >= 1");
  }
  if (rect_tol < 0.0 || rect_tol > 1.0) {
    throw Error(ErrorCode::ConfigError, "rect_tol must lie in [0, 1]");
  }
}

RegionTree build_region_tree(const BinaryImage& img, const SegmentationParams& params) {
  params.validate();
  const LabelMap map = connected_components(img, params.connectivity);
  const int min_w = params.resolved_min_w(img.width());
  const int min_h = params.resolved_min_h(img.width());
  const double page_area = static_cast<double>(img.width()) * img.height();

  RegionTree tree;
  for (const Component& c : map.components) {
    const BBox& b = c.bbox;
    if (b.w < min_w || b.h < min_h) continue;
    if (static_cast<double>(b.area()) > params.max_frac * page_area) continue;
    const double rect = border_coverage(map, c);
    if (rect < 1.0 - params.rect_tol) continue;
    tree.nodes.push_back({b, {}, rect});
  }

  for (std::size_t a = 0; a < tree.nodes.size(); ++a) {
    std::optional<std::size_t> parent;
    for (std::size_t b = 0; b < tree.nodes.size(); ++b) {
      if (a == b || !image::strictly_inside(tree.nodes[a].bbox, tree.nodes[b].bbox)) continue;
      if (!parent || tree.nodes[b].bbox.area() < tree.nodes[*parent].bbox.area()) parent = b;
    }
    if (parent) {
      tree.nodes[*parent].children.push_back(a);
    } else {
      tree.roots.push_back(a);
    }
  }
  return tree;
}

std::vector<Segment> segment_page(const GrayImage& page, const SegmentationParams& params) {
  const BinaryImage bin = image::threshold_binary(page, params.threshold, params.invert);
  const RegionTree tree = build_region_tree(bin, params);

  std::vector<BBox> boxes;
  boxes.reserve(tree.nodes.size());
  for (const RegionNode& n : tree.nodes) boxes.push_back(n.bbox);
  std::sort(boxes.begin(), boxes.end(), [](const BBox& a, const BBox& b) {
    return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
  });
  boxes.erase(std::unique(boxes.begin(), boxes.end()), boxes.end());

  std::vector<Segment> out;
  out.reserve(boxes.size());
  for (const BBox& b : boxes) out.push_back({b, image::crop(page, b)});
  return out;
}

}  // namespace tender::seg

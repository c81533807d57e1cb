#pragma once

// Rectangular region finder: connected components of the binarized page,
// a containment hierarchy over the rectangular ones, and crop emission.

#include <cstddef>
#include <optional>
#include <vector>

#include "tender/image.hpp"

namespace tender::seg {

using image::BBox;
using image::BinaryImage;
using image::GrayImage;

struct Component {
  int label = 0;  // dense, from 1
  BBox bbox;
  long long area = 0;
};

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // 0 = background
  std::vector<Component> components;  // components[i].label == i + 1

  int at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Labels are assigned in (bbox.y, bbox.x) order of the components, with the
// raster position of the first pixel breaking ties.
LabelMap connected_components(const BinaryImage& img, int connectivity = 8);

// Fraction of the one-pixel ring along the component's bbox edge that belongs
// to the component. Frames and filled boxes score 1; glyphs score low.
double border_coverage(const LabelMap& map, const Component& comp);

struct SegmentationParams {
  std::optional<int> min_w;  // default: 5% of page width
  std::optional<int> min_h;  // default: 5% of page width
  double max_frac = 0.9;
  image::Threshold threshold = image::kAutoThreshold;
  bool invert = true;
  double rect_tol = 0.25;
  int connectivity = 8;

  int resolved_min_w(int page_w) const;
  int resolved_min_h(int page_w) const;
  void validate() const;
};

struct RegionNode {
  BBox bbox;
  std::vector<std::size_t> children;  // indices into RegionTree::nodes
  double rectangularity = 0.0;
};

struct RegionTree {
  std::vector<RegionNode> nodes;  // sorted by (y, x)
  std::vector<std::size_t> roots;
};

RegionTree build_region_tree(const BinaryImage& img, const SegmentationParams& params);

struct Segment {
  BBox bbox;
  GrayImage crop;
};

// Roots and accepted children, cropped from the original page, ordered
// top-to-bottom then left-to-right; identical boxes are emitted once.
std::vector<Segment> segment_page(const GrayImage& page, const SegmentationParams& params);

}  // namespace tender::seg

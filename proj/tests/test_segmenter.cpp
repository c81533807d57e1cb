#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stack>

#include "seg_oracle.hpp"
#include "tender/pipeline/synthetic.hpp"
#include "tender/segmenter.hpp"

using namespace tender;
using namespace tender::image;
using namespace tender::seg;
using namespace tender::testing;

namespace {

void outline(BinaryImage& img, BBox b, int stroke = 1) {
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x)
      if (x < b.x + stroke || x >= b.right() - stroke || y < b.y + stroke || y >= b.bottom() - stroke)
        img.set(x, y, true);
}

void outline(GrayImage& img, BBox b, int stroke = 2) {
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x)
      if (x < b.x + stroke || x >= b.right() - stroke || y < b.y + stroke || y >= b.bottom() - stroke)
        img.at(x, y) = 0;
}

}  // namespace

TEST_CASE("connected_components examples") {
  BinaryImage blank(10, 10);
  CHECK(connected_components(blank).components.empty());

  BinaryImage two(12, 8);
  for (int y = 1; y < 4; ++y)
    for (int x = 1; x < 4; ++x) two.set(x, y, true);
  for (int y = 4; y < 7; ++y)
    for (int x = 7; x < 10; ++x) two.set(x, y, true);
  auto m = connected_components(two);
  REQUIRE(m.components.size() == 2);
  CHECK(m.components[0].bbox == BBox{1, 1, 3, 3});
  CHECK(m.components[1].bbox == BBox{7, 4, 3, 3});
  CHECK(m.components[0].area == 9);
  CHECK(m.components[0].label == 1);
  CHECK(m.components[1].label == 2);
}

TEST_CASE("diagonal neighbours join only under 8-connectivity") {
  BinaryImage d(3, 3);
  d.set(0, 0, true);
  d.set(1, 1, true);
  d.set(2, 2, true);
  CHECK(connected_components(d, 8).components.size() == 1);
  CHECK(connected_components(d, 4).components.size() == 3);
  CHECK_THROWS_AS(connected_components(d, 6), Error);
}

TEST_CASE("connected_components equals flood fill on random images") {
  std::mt19937 gen(2024);
  for (int conn : {4, 8}) {
    for (int trial = 0; trial < 100; ++trial) {
      int w = 1 + static_cast<int>(gen() % 24), h = 1 + static_cast<int>(gen() % 24);
      double density = 0.2 + 0.6 * (trial % 7) / 6.0;
      auto img = random_binary(gen, w, h, density);
      auto m = connected_components(img, conn);
      auto oracle = flood_fill_oracle(img, conn);
      REQUIRE(same_partition(m.labels, oracle));
      CHECK(m.components.size() == static_cast<std::size_t>(*std::max_element(oracle.begin(), oracle.end())));
    }
  }
}

TEST_CASE("component statistics are consistent with the label map") {
  std::mt19937 gen(77);
  for (int trial = 0; trial < 30; ++trial) {
    auto img = random_binary(gen, 20, 15, 0.45);
    auto m = connected_components(img, trial % 2 ? 4 : 8);
    std::vector<long long> area(m.components.size() + 1, 0);
    struct Ext {
      int x0 = 1 << 20, y0 = 1 << 20, x1 = -1, y1 = -1;
    };
    std::vector<Ext> box(m.components.size() + 1);
    for (int y = 0; y < 15; ++y) {
      for (int x = 0; x < 20; ++x) {
        int l = m.at(x, y);
        CHECK((l != 0) == img.at(x, y));
        if (!l) continue;
        area[l]++;
        auto& b = box[l];
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
    for (std::size_t i = 0; i < m.components.size(); ++i) {
      const auto& c = m.components[i];
      CHECK(c.label == static_cast<int>(i) + 1);
      CHECK(c.area == area[c.label]);
      const auto& e = box[c.label];
      CHECK(c.bbox == BBox{e.x0, e.y0, e.x1 - e.x0 + 1, e.y1 - e.y0 + 1});
      CHECK(c.area <= c.bbox.area());
      if (i > 0) {
        const auto& p = m.components[i - 1];
        CHECK(std::pair(p.bbox.y, p.bbox.x) <= std::pair(c.bbox.y, c.bbox.x));
      }
    }
  }
}

TEST_CASE("border_coverage scores frames high and glyph-like shapes low") {
  BinaryImage img(40, 40);
  outline(img, {2, 2, 20, 15});
  // an L-shaped stroke covers only half of its ring
  for (int y = 25; y < 35; ++y) img.set(25, y, true);
  for (int x = 25; x < 35; ++x) img.set(x, 34, true);
  auto m = connected_components(img);
  REQUIRE(m.components.size() == 2);
  CHECK(border_coverage(m, m.components[0]) == doctest::Approx(1.0));
  CHECK(border_coverage(m, m.components[1]) < 0.6);
}

TEST_CASE("build_region_tree examples") {
  SegmentationParams p;
  p.min_w = 10;
  p.min_h = 10;

  SUBCASE("single hollow rectangle") {
    BinaryImage img(100, 100);
    outline(img, {10, 10, 50, 40});
    auto t = build_region_tree(img, p);
    REQUIRE(t.nodes.size() == 1);
    REQUIRE(t.roots.size() == 1);
    CHECK(t.nodes[0].bbox == BBox{10, 10, 50, 40});
    CHECK(t.nodes[0].children.empty());
  }
  SUBCASE("nested rectangles") {
    BinaryImage img(100, 100);
    outline(img, {10, 10, 70, 70});
    outline(img, {20, 20, 30, 30});
    auto t = build_region_tree(img, p);
    REQUIRE(t.roots.size() == 1);
    const auto& root = t.nodes[t.roots[0]];
    CHECK(root.bbox == BBox{10, 10, 70, 70});
    REQUIRE(root.children.size() == 1);
    CHECK(t.nodes[root.children[0]].bbox == BBox{20, 20, 30, 30});
  }
  SUBCASE("below min_w is excluded") {
    BinaryImage img(100, 100);
    outline(img, {10, 10, 8, 30});
    CHECK(build_region_tree(img, p).nodes.empty());
  }
  SUBCASE("child failing the dimension rule is pruned") {
    BinaryImage img(100, 100);
    outline(img, {10, 10, 70, 70});
    outline(img, {20, 20, 6, 6});
    auto t = build_region_tree(img, p);
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.nodes[0].children.empty());
  }
}

TEST_CASE("region hierarchy matches an exhaustive containment oracle") {
  std::mt19937 gen(31);
  SegmentationParams p;
  p.min_w = 4;
  p.min_h = 4;
  p.max_frac = 1.0;
  for (int trial = 0; trial < 25; ++trial) {
    BinaryImage img(120, 120);
    // concentric and side-by-side outlines with a 2px gap so they stay separate
    std::vector<BBox> drawn;
    for (int k = 0; k < 6; ++k) {
      int w = 8 + static_cast<int>(gen() % 50), h = 8 + static_cast<int>(gen() % 50);
      BBox b{static_cast<int>(gen() % (120 - w)), static_cast<int>(gen() % (120 - h)), w, h};
      bool clash = false;
      for (const auto& o : drawn) {
        BBox grown{o.x - 2, o.y - 2, o.w + 4, o.h + 4};
        bool overlaps = iou(b, grown) > 0.0;
        bool contained = strictly_inside(grown, b) || strictly_inside(BBox{b.x - 2, b.y - 2, b.w + 4, b.h + 4}, o);
        if (overlaps && !contained) clash = true;
      }
      if (clash) continue;
      drawn.push_back(b);
      outline(img, b);
    }
    auto t = build_region_tree(img, p);
    std::vector<BBox> boxes;
    for (const auto& n : t.nodes) boxes.push_back(n.bbox);
    std::set<std::size_t> seen_child;
    for (std::size_t a = 0; a < boxes.size(); ++a) {
      std::optional<std::size_t> best;
      for (std::size_t b = 0; b < boxes.size(); ++b)
        if (a != b && strictly_inside(boxes[a], boxes[b]) && (!best || boxes[b].area() < boxes[*best].area()))
          best = b;
      bool is_root = std::find(t.roots.begin(), t.roots.end(), a) != t.roots.end();
      CHECK(is_root == !best.has_value());
      if (best) {
        const auto& ch = t.nodes[*best].children;
        CHECK(std::find(ch.begin(), ch.end(), a) != ch.end());
      }
      for (auto c : t.nodes[a].children) {
        CHECK(strictly_inside(boxes[c], boxes[a]));
        CHECK(seen_child.insert(c).second);
      }
    }
  }
}

TEST_CASE("segment_page examples") {
  GrayImage blank(200, 200, 255);
  CHECK(segment_page(blank, {}).empty());

  GrayImage big(200, 200, 255);
  outline(big, {1, 1, 198, 198});
  SegmentationParams half;
  half.max_frac = 0.5;
  CHECK(segment_page(big, half).empty());
  SegmentationParams whole;
  whole.max_frac = 1.0;
  CHECK(segment_page(big, whole).size() == 1);
}

TEST_CASE("segment_page recovers drawn frames from a synthetic page") {
  pipeline::CorpusSpec spec;
  spec.frames_per_page = 3;
  auto corpus = pipeline::generate_synthetic_corpus(1, spec, 5);
  REQUIRE(corpus.frames.size() == 3);
  auto segs = segment_page(corpus.pages[0], {});
  for (const auto& f : corpus.frames) {
    int hits = 0;
    for (const auto& s : segs) {
      if (std::abs(s.bbox.x - f.bbox.x) <= 2 && std::abs(s.bbox.y - f.bbox.y) <= 2 &&
          std::abs(s.bbox.right() - f.bbox.right()) <= 2 && std::abs(s.bbox.bottom() - f.bbox.bottom()) <= 2)
        ++hits;
    }
    CHECK(hits == 1);
  }
  for (const auto& s : segs) {
    CHECK(s.crop == crop(corpus.pages[0], s.bbox));
  }
}

TEST_CASE("segment_page output is ordered, in-bounds, and duplicate free") {
  pipeline::CorpusSpec spec;
  auto corpus = pipeline::generate_synthetic_corpus(4, spec, 17);
  for (const auto& page : corpus.pages) {
    auto segs = segment_page(page, {});
    std::set<std::tuple<int, int, int, int>> uniq;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& b = segs[i].bbox;
      CHECK(b.x >= 0);
      CHECK(b.y >= 0);
      CHECK(b.right() <= page.width());
      CHECK(b.bottom() <= page.height());
      CHECK(uniq.insert({b.x, b.y, b.w, b.h}).second);
      if (i > 0) CHECK(std::pair(segs[i - 1].bbox.y, segs[i - 1].bbox.x) <= std::pair(b.y, b.x));
    }
  }
}

TEST_CASE("segmentation is translation invariant under background padding") {
  pipeline::CorpusSpec spec;
  auto corpus = pipeline::generate_synthetic_corpus(2, spec, 23);
  SegmentationParams p;
  p.min_w = 30;
  p.min_h = 30;
  p.max_frac = 1.0;
  p.threshold = 128;
  for (const auto& page : corpus.pages) {
    const int dx = 13, dy = 7;
    GrayImage padded(page.width() + dx + 5, page.height() + dy + 9, 255);
    for (int y = 0; y < page.height(); ++y)
      for (int x = 0; x < page.width(); ++x) padded.at(x + dx, y + dy) = page.at(x, y);
    auto a = segment_page(page, p);
    auto b = segment_page(padded, p);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(b[i].bbox == BBox{a[i].bbox.x + dx, a[i].bbox.y + dy, a[i].bbox.w, a[i].bbox.h});
      CHECK(b[i].crop == a[i].crop);
    }
  }
}

TEST_CASE("raising min_w or min_h never adds regions") {
  pipeline::CorpusSpec spec;
  auto corpus = pipeline::generate_synthetic_corpus(3, spec, 41);
  for (const auto& page : corpus.pages) {
    std::set<std::tuple<int, int, int, int>> prev;
    bool first = true;
    for (int m : {1, 5, 20, 60, 100, 150, 250}) {
      SegmentationParams p;
      p.min_w = m;
      p.min_h = std::max(1, m / 2);
      std::set<std::tuple<int, int, int, int>> cur;
      for (const auto& s : segment_page(page, p)) cur.insert({s.bbox.x, s.bbox.y, s.bbox.w, s.bbox.h});
      if (!first) CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
      first = false;
    }
  }
}

TEST_CASE("invalid segmentation parameters are rejected") {
  SegmentationParams p;
  p.max_frac = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.max_frac = 0.5;
  p.min_w = 0;
  CHECK_THROWS_AS(p.validate(), Error);
}

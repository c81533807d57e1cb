#include "tender/pipeline/synthetic.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>

#include "tender/error.hpp"
#include "tender/fsutil.hpp"
#include "tender/nn/rng.hpp"
#include "tender/nn/train.hpp"
#include "tender/pipeline/png_io.hpp"

namespace tender::pipeline {

using image::BBox;
using image::GrayImage;

namespace {

constexpr std::uint8_t kPaper = 255;

void fill_rect(GrayImage& img, const BBox& b, std::uint8_t v) {
  const int x0 = std::max(0, b.x);
  const int y0 = std::max(0, b.y);
  const int x1 = std::min(img.width(), b.x + b.w);
  const int y1 = std::min(img.height(), b.y + b.h);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.at(x, y) = v;
  }
}

std::uint8_t ink(nn::Rng& rng) { return static_cast<std::uint8_t>(rng.range(0, 40)); }

void draw_frame(GrayImage& img, const BBox& b, int stroke, std::uint8_t v) {
  fill_rect(img, {b.x, b.y, b.w, stroke}, v);
  fill_rect(img, {b.x, b.y + b.h - stroke, b.w, stroke}, v);
  fill_rect(img, {b.x, b.y, stroke, b.h}, v);
  fill_rect(img, {b.x + b.w - stroke, b.y, stroke, b.h}, v);
}

bool intersects(const BBox& a, const BBox& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

BBox grow(const BBox& b, int m) { return {b.x - m, b.y - m, b.w + 2 * m, b.h + 2 * m}; }

// Lines of word-sized blobs inside `area`, skipping anything that would come
// within 3 px of a box in `avoid`. Blob heights stay well below any frame.
void draw_text(GrayImage& img, const BBox& area, const std::vector<BBox>& avoid, nn::Rng& rng) {
  for (int y = area.y; y + 8 <= area.y + area.h; y += rng.range(13, 16)) {
    int x = area.x + rng.range(0, 6);
    while (true) {
      const int w = rng.range(8, 40);
      const int h = rng.range(5, 7);
      if (x + w > area.x + area.w) break;
      const BBox word{x, y, w, h};
      const bool blocked = std::any_of(avoid.begin(), avoid.end(),
                                       [&](const BBox& a) { return intersects(grow(word, 3), a); });
      if (!blocked) fill_rect(img, word, ink(rng));
      x += w + rng.range(5, 9);
    }
  }
}

void speckle(GrayImage& img, nn::Rng& rng, const std::vector<BBox>& avoid) {
  const int count = img.width() * img.height() / 2000;
  for (int i = 0; i < count; ++i) {
    const int x = rng.range(0, img.width() - 1);
    const int y = rng.range(0, img.height() - 1);
    const BBox p{x, y, 1, 1};
    if (std::none_of(avoid.begin(), avoid.end(), [&](const BBox& a) { return intersects(grow(p, 2), a); })) {
      img.at(x, y) = static_cast<std::uint8_t>(rng.range(60, 140));
    }
  }
}

// Frame outline plus interior text lines; everything stays inside `b`.
void render_notice(GrayImage& img, const BBox& b, nn::Rng& rng) {
  const int stroke = rng.range(2, 4);
  draw_frame(img, b, stroke, ink(rng));
  const int inset = stroke + 5;
  if (b.w > 2 * inset + 10 && b.h > 2 * inset + 10) {
    draw_text(img, {b.x + inset, b.y + inset, b.w - 2 * inset, b.h - 2 * inset}, {}, rng);
  }
}

template <typename T>
std::vector<T> pick_distinct(const std::vector<T>& pool, int n, nn::Rng& rng) {
  std::vector<T> copy = pool;
  rng.shuffle(copy);
  copy.resize(std::min<std::size_t>(copy.size(), static_cast<std::size_t>(std::max(0, n))));
  return copy;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(int n_pages, const CorpusSpec& spec, std::uint64_t seed) {
  if (n_pages < 1) throw Error(ErrorCode::SpecInfeasible, "n_pages must be >= 1");
  if (spec.frames_per_page < 0) throw Error(ErrorCode::SpecInfeasible, "frames_per_page must be >= 0");
  if (spec.page_width < 1 || spec.page_height < 1) throw Error(ErrorCode::SpecInfeasible, "empty page");
  if (spec.frames_per_page > 0 &&
      (spec.min_frame_w < 8 || spec.min_frame_h < 8 || spec.min_frame_w > spec.max_frame_w ||
       spec.min_frame_h > spec.max_frame_h || spec.min_frame_w + 2 * spec.gap > spec.page_width ||
       spec.min_frame_h + 2 * spec.gap > spec.page_height)) {
    throw Error(ErrorCode::SpecInfeasible, "frame size range does not fit the page");
  }
  const int total = n_pages * spec.frames_per_page;
  const int n_tender = spec.tender_frames.value_or(total / 2);
  if (n_tender < 0 || n_tender > total) {
    throw Error(ErrorCode::SpecInfeasible, std::to_string(n_tender) + " tender frames requested, " +
                                               std::to_string(total) + " frames in total");
  }
  if (n_tender > 0 && static_cast<int>(spec.keywords.size()) < spec.keywords_per_tender) {
    throw Error(ErrorCode::SpecInfeasible, "fewer keywords than keywords_per_tender");
  }

  nn::Rng rng(seed);
  std::vector<int> tender_flags(static_cast<std::size_t>(total), 0);
  std::fill_n(tender_flags.begin(), n_tender, 1);
  rng.shuffle(tender_flags);

  SyntheticCorpus corpus;
  for (int p = 0; p < n_pages; ++p) {
    std::vector<BBox> boxes;
    for (int f = 0; f < spec.frames_per_page; ++f) {
      bool placed = false;
      for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
        const int w = rng.range(spec.min_frame_w, std::min(spec.max_frame_w, spec.page_width - 2 * spec.gap));
        const int h = rng.range(spec.min_frame_h, std::min(spec.max_frame_h, spec.page_height - 2 * spec.gap));
        const BBox b{rng.range(spec.gap, spec.page_width - spec.gap - w),
                     rng.range(spec.gap, spec.page_height - spec.gap - h), w, h};
        if (std::none_of(boxes.begin(), boxes.end(), [&](const BBox& o) { return intersects(grow(b, spec.gap), o); })) {
          boxes.push_back(b);
          placed = true;
        }
      }
      if (!placed) {
        throw Error(ErrorCode::SpecInfeasible, "page " + std::to_string(p) + ": no room for frame " +
                                                   std::to_string(f + 1) + " of " +
                                                   std::to_string(spec.frames_per_page));
      }
    }

    GrayImage page(spec.page_width, spec.page_height, kPaper);
    std::vector<BBox> keep_out;
    for (const auto& b : boxes) keep_out.push_back(grow(b, 4));
    if (spec.body_text) {
      draw_text(page, {spec.gap, spec.gap, spec.page_width - 2 * spec.gap, spec.page_height - 2 * spec.gap}, keep_out,
                rng);
    }
    speckle(page, rng, keep_out);
    for (std::size_t f = 0; f < boxes.size(); ++f) {
      render_notice(page, boxes[f], rng);
      TruthFrame t;
      t.page = p;
      t.bbox = boxes[f];
      t.tender = tender_flags[static_cast<std::size_t>(p * spec.frames_per_page) + f] != 0;
      t.words = pick_distinct(spec.fillers, spec.words_per_frame, rng);
      if (t.tender) {
        const auto kws = pick_distinct(spec.keywords, spec.keywords_per_tender, rng);
        t.words.insert(t.words.begin(), kws.begin(), kws.end());
      }
      corpus.frames.push_back(std::move(t));
    }
    corpus.pages.push_back(std::move(page));
  }
  return corpus;
}

std::string truth_to_json(const std::vector<TruthFrame>& frames) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : frames) {
    arr.push_back({{"page", f.page},
                   {"bbox", {{"x", f.bbox.x}, {"y", f.bbox.y}, {"w", f.bbox.w}, {"h", f.bbox.h}}},
                   {"tender", f.tender},
                   {"words", f.words}});
  }
  return nlohmann::json{{"frames", arr}}.dump(2) + "\n";
}

std::vector<TruthFrame> truth_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    std::vector<TruthFrame> frames;
    for (const auto& f : doc.at("frames")) {
      const auto& b = f.at("bbox");
      frames.push_back({f.at("page").get<int>(),
                        {b.at("x").get<int>(), b.at("y").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()},
                        f.at("tender").get<bool>(),
                        f.at("words").get<std::vector<std::string>>()});
    }
    return frames;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("truth file: ") + e.what());
  }
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t p = 0; p < corpus.pages.size(); ++p) {
    char name[32];
    std::snprintf(name, sizeof(name), "page-%03zu.png", p);
    write_png(dir / name, corpus.pages[p]);
  }
  write_file_atomic(dir / "truth.json", truth_to_json(corpus.frames));
}

ClassifierSamples generate_classifier_samples(int n, std::size_t input_size, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::SpecInfeasible, "need at least 2 samples");
  nn::Rng rng(seed);
  ClassifierSamples out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : 0;
    const int w = rng.range(60, 260);
    const int h = rng.range(50, 220);
    GrayImage crop(w, h, kPaper);
    if (label == 1) {
      render_notice(crop, {0, 0, w, h}, rng);
    } else if (rng.below(3) != 0) {
      draw_text(crop, {2, 2, w - 4, h - 4}, {}, rng);
      speckle(crop, rng, {});
    } else {
      for (auto& v : crop.data()) v = static_cast<std::uint8_t>(rng.range(150, 255));
      speckle(crop, rng, {});
    }
    out.images.push_back(nn::prepare_input(crop, input_size, 0));
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace tender::pipeline

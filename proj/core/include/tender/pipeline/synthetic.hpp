#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tender/image.hpp"

namespace tender::pipeline {

struct CorpusSpec {
  int page_width = 600;
  int page_height = 800;
  int frames_per_page = 3;
  std::optional<int> tender_frames;  // total over the corpus; default half of all frames
  int min_frame_w = 90;
  int max_frame_w = 260;
  int min_frame_h = 70;
  int max_frame_h = 220;
  int gap = 12;  // minimum distance between frames and from the page edge
  std::vector<std::string> keywords = {"tender", "notice", "bid", "quotation", "बोलपत्र", "सूचना"};
  int keywords_per_tender = 4;
  std::vector<std::string> fillers = {"market", "report", "price", "weather", "sports",
                                      "city", "council", "news", "today", "festival"};
  int words_per_frame = 8;
  bool body_text = true;
};

struct TruthFrame {
  int page = 0;
  image::BBox bbox;
  bool tender = false;
  std::vector<std::string> words;  // what an OCR engine should read inside

  bool operator==(const TruthFrame&) const = default;
};

struct SyntheticCorpus {
  std::vector<image::GrayImage> pages;
  std::vector<TruthFrame> frames;  // by page, then placement order
};

// White pages with dark rectangular frames at non-overlapping positions,
// text-like blobs inside and between them, and sparse speckle. Tender
// frames carry `keywords_per_tender` distinct keywords among their words.
// Throws SpecInfeasible when frames cannot be placed.
SyntheticCorpus generate_synthetic_corpus(int n_pages, const CorpusSpec& spec, std::uint64_t seed);

std::string truth_to_json(const std::vector<TruthFrame>& frames);
std::vector<TruthFrame> truth_from_json(const std::string& json);

// Writes page-000.png ... and truth.json.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

// Balanced two-class crops already sized input_size x input_size: label 1 is
// a framed notice crop, label 0 a frameless text or noise patch. Both are
// preprocessed like pipeline crops (pad with 0, bilinear resize).
struct ClassifierSamples {
  std::vector<image::GrayImage> images;
  std::vector<int> labels;
};
ClassifierSamples generate_classifier_samples(int n, std::size_t input_size, std::uint64_t seed);

}  // namespace tender::pipeline

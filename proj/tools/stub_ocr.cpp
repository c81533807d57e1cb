// Fixture OCR engine for hermetic runs. Prints a word table on stdout in the
// same 12-column layout as the real engine.
//
//   tender_stub_ocr --truth truth.json <crop.png>   words of the planted frame
//   tender_stub_ocr --canned table.tsv <image>      the file verbatim
//   tender_stub_ocr --fail <image>                  exit 1 with a message
#include <CLI11.hpp>

#include <iostream>
#include <regex>

#include "tender/fsutil.hpp"
#include "tender/ocr.hpp"
#include "tender/pipeline/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stub OCR engine"};
  std::string truth;
  std::string canned;
  std::string input;
  bool fail = false;
  double conf = 95.0;
  app.add_option("--truth", truth, "ground-truth JSON from the synthetic corpus");
  app.add_option("--canned", canned, "emit this TSV file verbatim");
  app.add_flag("--fail", fail, "exit nonzero");
  app.add_option("--conf", conf, "confidence for emitted words");
  app.add_option("input", input)->required();
  CLI11_PARSE(app, argc, argv);

  if (fail) {
    std::cerr << "stub engine: simulated failure on " << input << "\n";
    return 1;
  }
  try {
    if (!canned.empty()) {
      std::cout << tender::read_file(canned);
      return 0;
    }
    std::vector<tender::ocr::OcrToken> tokens;
    tokens.push_back({1, 1, 0, 0, 0, 0, 0, 0, 0, 0, -1.0, "", 0});
    if (!truth.empty()) {
      static const std::regex kName(R"(page-(\d+)__x(\d+)_y(\d+)_w(\d+)_h(\d+)\.png$)");
      std::smatch m;
      if (std::regex_search(input, m, kName)) {
        const int page = std::stoi(m[1]);
        const tender::image::BBox box{std::stoi(m[2]), std::stoi(m[3]), std::stoi(m[4]), std::stoi(m[5])};
        for (const auto& f : tender::pipeline::truth_from_json(tender::read_file(truth))) {
          if (f.page != page || tender::image::iou(f.bbox, box) < 0.5) continue;
          int word = 1;
          for (const auto& w : f.words) {
            tender::ocr::OcrToken t{5, 1, 1, 1, 1, word, 10 * word, 10, 40, 12, conf, w, 1};
            ++word;
            tokens.push_back(t);
          }
        }
      }
    }
    std::cout << tender::ocr::serialize_ocr_tsv(tokens);
  } catch (const std::exception& e) {
    std::cerr << "stub engine: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// Fixture rasterizer. The "PDF" is a JSON document listing page images
// ({"pages": ["a.png", ...]}, relative to the document) or asking for blank
// pages ({"blank_pages": 3, "width": 100, "height": 140}). Pages are written
// as <outdir>/out-1.png, out-2.png, ...
//
//   tender_stub_rasterizer [--fail] <input> <outdir> <dpi>
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "tender/fsutil.hpp"
#include "tender/pipeline/png_io.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"stub rasterizer"};
  std::string input;
  std::string outdir;
  int dpi = 0;
  bool fail = false;
  app.add_flag("--fail", fail, "exit nonzero");
  app.add_option("input", input)->required();
  app.add_option("outdir", outdir)->required();
  app.add_option("dpi", dpi)->required()->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  if (fail) {
    std::cerr << "stub rasterizer: simulated failure on " << input << "\n";
    return 3;
  }
  try {
    const auto doc = nlohmann::json::parse(tender::read_file(input));
    fs::create_directories(outdir);
    if (doc.contains("pages")) {
      int n = 1;
      for (const auto& p : doc.at("pages")) {
        fs::path src = p.get<std::string>();
        if (src.is_relative()) src = fs::path(input).parent_path() / src;
        fs::copy_file(src, fs::path(outdir) / ("out-" + std::to_string(n++) + ".png"),
                      fs::copy_options::overwrite_existing);
      }
    } else {
      const int count = doc.at("blank_pages").get<int>();
      const tender::image::GrayImage blank(doc.value("width", 100), doc.value("height", 140), 255);
      for (int n = 1; n <= count; ++n) {
        tender::pipeline::write_png(fs::path(outdir) / ("out-" + std::to_string(n) + ".png"), blank);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "stub rasterizer: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

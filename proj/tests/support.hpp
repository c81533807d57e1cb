#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>

#include "tender/error.hpp"

namespace tender::testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tender-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Code of the library error `f` throws, or nullopt when it returns normally.
template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path data_dir() { return TENDER_TEST_DATA; }
inline std::string stub_ocr() { return TENDER_STUB_OCR; }
inline std::string stub_rasterizer() { return TENDER_STUB_RASTERIZER; }
inline std::string cli() { return TENDER_CLI; }

}  // namespace tender::testing

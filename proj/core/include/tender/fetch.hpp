#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tender::fetch {

struct SourceConfig {
  std::string name = "default";
  std::string index_url;
  std::string link_class = "pdf";
  std::filesystem::path download_dir = "downloads";
  int poll_interval_ms = 200;
  int timeout_ms = 30000;
  std::string user_agent = "tender-fetch/0.1";
  int polite_delay_ms = 0;  // pause before every request

  // Throws ConfigError unless timeout > poll_interval > 0 and the URL parses.
  void validate() const;
};

struct DownloadRecord {
  std::string url;
  std::filesystem::path local_path;
  std::uint64_t byte_size = 0;
  std::string sha256;
  std::string fetched_at;  // ISO-8601 UTC
  int http_status = 0;

  bool operator==(const DownloadRecord&) const = default;
};

struct Url {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path = "/";  // includes the query, never the fragment

  std::string origin() const;
  std::string str() const;
};

std::optional<Url> parse_url(std::string_view url);
// Reference resolution against an absolute base (dot segments removed,
// fragment dropped). Returns nullopt when the result is not http(s).
std::optional<std::string> resolve_url(std::string_view base, std::string_view href);

// GET with up to 5 redirects. Throws HttpError, Timeout, TooManyRedirects.
std::string fetch_index(const SourceConfig& cfg);

// hrefs of elements whose class list contains `link_class`, resolved against
// `base_url`, in document order, first occurrence kept.
std::vector<std::string> extract_pdf_links(std::string_view html, std::string_view link_class,
                                           std::string_view base_url);

// Streams to `<name>.part` under cfg.download_dir / subdir, then renames.
// A sidecar `<name>.record.json` makes repeat calls free: when the final file
// still hashes to the recorded digest, the record is returned without any
// request. Throws HttpError, Timeout, SizeMismatch, IoError.
DownloadRecord download_file(const std::string& url, const SourceConfig& cfg,
                             const std::filesystem::path& subdir = {});

inline constexpr int kDefaultDpi = 150;

// Runs the rasterizer command ({input}, {outdir}, {dpi}) into a staging
// directory and renames its images to out_dir/page-000.png, page-001.png, ...
// in page order. Throws RasterizerNotFound, RasterizerFailed, NoPagesProduced.
std::vector<std::filesystem::path> rasterize_pdf(const std::filesystem::path& pdf, int dpi,
                                                 const std::filesystem::path& out_dir,
                                                 std::string_view command_template);

std::string page_file_name(int page);

}  // namespace tender::fetch

#include <httplib.h>

#include "tender/fetch.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "tender/error.hpp"
#include "tender/fsutil.hpp"
#include "tender/hash.hpp"
#include "tender/process.hpp"

namespace tender::fetch {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kMaxRedirects = 5;

void SourceConfig::validate() const {
  if (!(poll_interval_ms > 0 && timeout_ms > poll_interval_ms)) {
    throw Error(ErrorCode::ConfigError, "source '" + name + "': need timeout > poll_interval > 0");
  }
  if (!parse_url(index_url)) throw Error(ErrorCode::ConfigError, "source '" + name + "': bad index_url '" + index_url + "'");
  if (polite_delay_ms < 0) throw Error(ErrorCode::ConfigError, "source '" + name + "': negative polite delay");
}

// --- URLs ---------------------------------------------------------------------

std::string Url::origin() const {
  const bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
  return scheme + "://" + host + (default_port ? "" : ":" + std::to_string(port));
}

std::string Url::str() const { return origin() + path; }

std::optional<Url> parse_url(std::string_view url) {
  const auto sep = url.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  Url u;
  u.scheme = std::string(url.substr(0, sep));
  std::transform(u.scheme.begin(), u.scheme.end(), u.scheme.begin(), [](unsigned char c) { return std::tolower(c); });
  if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
  std::string_view rest = url.substr(sep + 3);
  const auto path_start = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, path_start);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);
  u.port = u.scheme == "https" ? 443 : 80;
  if (const auto colon = authority.rfind(':'); colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    const std::string_view port = authority.substr(colon + 1);
    if (port.empty() || port.size() > 5 || !std::all_of(port.begin(), port.end(), ::isdigit)) return std::nullopt;
    u.port = std::stoi(std::string(port));
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) return std::nullopt;
  u.host = std::string(authority);
  std::string_view path = path_start == std::string_view::npos ? std::string_view{} : rest.substr(path_start);
  if (const auto hash = path.find('#'); hash != std::string_view::npos) path = path.substr(0, hash);
  u.path = std::string(path);
  if (u.path.empty() || u.path[0] == '?') u.path.insert(0, "/");
  return u;
}

namespace {

std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  const bool absolute = !path.empty() && path[0] == '/';
  bool trailing = false;
  while (pos <= path.size()) {
    auto slash = path.find('/', pos);
    if (slash == std::string_view::npos) slash = path.size();
    const std::string_view seg = path.substr(pos, slash - pos);
    pos = slash + 1;
    trailing = false;
    if (seg == ".") {
      trailing = true;
    } else if (seg == "..") {
      if (!out.empty()) out.pop_back();
      trailing = true;
    } else if (!seg.empty() || slash == path.size()) {
      out.push_back(seg);
    }
  }
  std::string result = absolute ? "/" : "";
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i) result += "/";
    result += out[i];
  }
  if (trailing && (result.empty() || result.back() != '/')) result += "/";
  return result;
}

}  // namespace

std::optional<std::string> resolve_url(std::string_view base, std::string_view href) {
  while (!href.empty() && std::isspace(static_cast<unsigned char>(href.front()))) href.remove_prefix(1);
  while (!href.empty() && std::isspace(static_cast<unsigned char>(href.back()))) href.remove_suffix(1);
  if (const auto hash = href.find('#'); hash != std::string_view::npos) href = href.substr(0, hash);

  const auto colon = href.find(':');
  const auto first_delim = href.find_first_of("/?");
  if (colon != std::string_view::npos && (first_delim == std::string_view::npos || colon < first_delim)) {
    auto u = parse_url(href);
    if (!u) return std::nullopt;
    u->path = remove_dot_segments(u->path.substr(0, u->path.find('?'))) +
              (u->path.find('?') != std::string::npos ? u->path.substr(u->path.find('?')) : "");
    return u->str();
  }
  auto b = parse_url(base);
  if (!b) return std::nullopt;
  if (href.substr(0, 2) == "//") return resolve_url(b->scheme + ":" + std::string(href), "");
  if (href.empty()) return b->str();

  const std::string base_path = b->path.substr(0, b->path.find('?'));
  std::string target;
  if (href[0] == '?') {
    target = base_path + std::string(href);
  } else {
    const std::string_view ref_path = href.substr(0, href.find('?'));
    const std::string query = href.find('?') != std::string_view::npos ? std::string(href.substr(href.find('?'))) : "";
    std::string merged;
    if (ref_path.empty()) {
      merged = base_path;
    } else if (ref_path[0] == '/') {
      merged = std::string(ref_path);
    } else {
      merged = base_path.substr(0, base_path.rfind('/') + 1) + std::string(ref_path);
    }
    target = remove_dot_segments(merged) + query;
  }
  b->path = target.empty() || target[0] != '/' ? "/" + target : target;
  return b->str();
}

// --- HTML ---------------------------------------------------------------------

namespace {

std::string decode_entities(std::string_view s) {
  static const std::pair<std::string_view, char> kNamed[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''}, {"&apos;", '\''}};
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    bool replaced = false;
    if (s[i] == '&') {
      for (const auto& [name, ch] : kNamed) {
        if (s.substr(i, name.size()) == name) {
          out.push_back(ch);
          i += name.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(s[i++]);
  }
  return out;
}

bool has_class(std::string_view classes, std::string_view wanted) {
  std::size_t pos = 0;
  while (pos < classes.size()) {
    while (pos < classes.size() && std::isspace(static_cast<unsigned char>(classes[pos]))) ++pos;
    std::size_t end = pos;
    while (end < classes.size() && !std::isspace(static_cast<unsigned char>(classes[end]))) ++end;
    if (end > pos && classes.substr(pos, end - pos) == wanted) return true;
    pos = end;
  }
  return false;
}

}  // namespace

std::vector<std::string> extract_pdf_links(std::string_view html, std::string_view link_class,
                                           std::string_view base_url) {
  std::vector<std::string> links;
  std::size_t i = 0;
  const auto n = html.size();
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (i < n) {
    const auto lt = html.find('<', i);
    if (lt == std::string_view::npos) break;
    if (html.substr(lt, 4) == "<!--") {
      const auto end = html.find("-->", lt + 4);
      if (end == std::string_view::npos) break;
      i = end + 3;
      continue;
    }
    i = lt + 1;
    if (i >= n || !std::isalpha(static_cast<unsigned char>(html[i]))) continue;
    std::size_t j = i;
    while (j < n && !is_space(html[j]) && html[j] != '>' && html[j] != '/') ++j;
    std::string tag(html.substr(i, j - i));
    std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char c) { return std::tolower(c); });

    std::optional<std::string> href;
    std::optional<std::string> cls;
    while (j < n && html[j] != '>') {
      while (j < n && (is_space(html[j]) || html[j] == '/')) ++j;
      if (j >= n || html[j] == '>') break;
      std::size_t k = j;
      while (k < n && !is_space(html[k]) && html[k] != '=' && html[k] != '>') ++k;
      std::string name(html.substr(j, k - j));
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      while (k < n && is_space(html[k])) ++k;
      std::string value;
      if (k < n && html[k] == '=') {
        ++k;
        while (k < n && is_space(html[k])) ++k;
        if (k < n && (html[k] == '"' || html[k] == '\'')) {
          const char q = html[k];
          const auto close = html.find(q, k + 1);
          if (close == std::string_view::npos) return links;
          value = decode_entities(html.substr(k + 1, close - k - 1));
          k = close + 1;
        } else {
          std::size_t e = k;
          while (e < n && !is_space(html[e]) && html[e] != '>') ++e;
          value = decode_entities(html.substr(k, e - k));
          k = e;
        }
      }
      if (name == "href" && !href) href = value;
      if (name == "class" && !cls) cls = value;
      j = std::max(k, j + 1);
    }
    i = j;
    if (tag == "script" || tag == "style") {
      const auto close = html.find("</" + tag, i);
      i = close == std::string_view::npos ? n : close;
    }
    if (!href || !cls || !has_class(*cls, link_class)) continue;
    auto abs = resolve_url(base_url, *href);
    if (abs && std::find(links.begin(), links.end(), *abs) == links.end()) links.push_back(std::move(*abs));
  }
  return links;
}

// --- HTTP ---------------------------------------------------------------------

namespace {

std::unique_ptr<httplib::Client> make_client(const Url& u, const SourceConfig& cfg) {
  auto cli = std::make_unique<httplib::Client>(u.origin());
  const auto ms = std::chrono::milliseconds(cfg.timeout_ms);
  cli->set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(ms));
  cli->set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(ms));
  cli->set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(ms));
  cli->set_follow_location(false);
  cli->set_default_headers({{"User-Agent", cfg.user_agent}});
  return cli;
}

bool is_redirect(int status) {
  return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

void polite_pause(const SourceConfig& cfg) {
  if (cfg.polite_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.polite_delay_ms));
}

[[noreturn]] void transport_failure(httplib::Error err, const std::string& url, Clock::time_point start,
                                    const SourceConfig& cfg) {
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
  if (err == httplib::Error::ConnectionTimeout || elapsed >= cfg.timeout_ms) {
    throw Error(ErrorCode::Timeout, url + ": no complete response within " + std::to_string(cfg.timeout_ms) + " ms");
  }
  throw Error(ErrorCode::HttpError, url + ": " + httplib::to_string(err));
}

std::string next_location(const std::string& current, const httplib::Headers& headers, int status) {
  const auto it = headers.find("Location");
  if (it == headers.end()) throw Error(ErrorCode::HttpError, current + ": redirect " + std::to_string(status) + " without Location");
  auto next = resolve_url(current, it->second);
  if (!next) throw Error(ErrorCode::HttpError, current + ": unusable redirect to " + it->second);
  return *next;
}

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_name_for(const Url& u) {
  std::string path = u.path.substr(0, u.path.find('?'));
  std::string name = path.substr(path.rfind('/') + 1);
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') c = '_';
  }
  if (name.empty() || name == "." || name == "..") name = "download.pdf";
  return name;
}

nlohmann::json to_json(const DownloadRecord& r) {
  return {{"url", r.url},
          {"local_path", r.local_path.string()},
          {"byte_size", r.byte_size},
          {"sha256", r.sha256},
          {"fetched_at", r.fetched_at},
          {"http_status", r.http_status}};
}

std::optional<DownloadRecord> reusable_record(const fs::path& final_path, const fs::path& sidecar,
                                              const std::string& url) {
  std::error_code ec;
  if (!fs::exists(final_path, ec) || !fs::exists(sidecar, ec)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_file(sidecar));
    DownloadRecord r{j.at("url").get<std::string>(),  j.at("local_path").get<std::string>(),
                     j.at("byte_size").get<std::uint64_t>(), j.at("sha256").get<std::string>(),
                     j.at("fetched_at").get<std::string>(), j.at("http_status").get<int>()};
    if (r.url != url || r.local_path != final_path) return std::nullopt;
    if (fs::file_size(final_path) != r.byte_size || sha256_file(final_path) != r.sha256) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Returns once the size has been equal on two consecutive polls.
std::uint64_t wait_for_stable_size(const fs::path& path, const SourceConfig& cfg, Clock::time_point start) {
  std::uint64_t last = fs::file_size(path);
  while (true) {
    std::this_thread::sleep_for(std::chrono::milliseconds(cfg.poll_interval_ms));
    const std::uint64_t now = fs::file_size(path);
    if (now == last) return now;
    last = now;
    if (Clock::now() - start > std::chrono::milliseconds(cfg.timeout_ms)) {
      throw Error(ErrorCode::Timeout, path.string() + " kept growing");
    }
  }
}

}  // namespace

std::string fetch_index(const SourceConfig& cfg) {
  std::string url = cfg.index_url;
  const auto start = Clock::now();
  for (int hop = 0; hop <= kMaxRedirects; ++hop) {
    const auto u = parse_url(url);
    if (!u) throw Error(ErrorCode::HttpError, "unsupported URL '" + url + "'");
    polite_pause(cfg);
    auto cli = make_client(*u, cfg);
    auto res = cli->Get(u->path);
    if (!res) transport_failure(res.error(), url, start, cfg);
    if (is_redirect(res->status)) {
      url = next_location(url, res->headers, res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::HttpError, url + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
  }
  throw Error(ErrorCode::TooManyRedirects, cfg.index_url + ": more than " + std::to_string(kMaxRedirects) + " redirects");
}

DownloadRecord download_file(const std::string& url, const SourceConfig& cfg, const fs::path& subdir) {
  const auto first = parse_url(url);
  if (!first) throw Error(ErrorCode::HttpError, "unsupported URL '" + url + "'");
  const fs::path dir = cfg.download_dir / subdir;
  const std::string name = file_name_for(*first);
  const fs::path final_path = dir / name;
  const fs::path part = dir / (name + ".part");
  const fs::path sidecar = dir / (name + ".record.json");

  if (auto reused = reusable_record(final_path, sidecar, url)) return *reused;

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  const auto start = Clock::now();
  std::string current = url;
  for (int hop = 0; hop <= kMaxRedirects; ++hop) {
    const auto u = parse_url(current);
    if (!u) throw Error(ErrorCode::HttpError, "unsupported URL '" + current + "'");
    polite_pause(cfg);
    auto cli = make_client(*u, cfg);

    std::ofstream out(part, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + part.string());
    int status = 0;
    std::optional<std::uint64_t> expected;
    std::uint64_t received = 0;
    bool timed_out = false;
    bool write_failed = false;
    auto res = cli->Get(
        u->path,
        [&](const httplib::Response& r) {
          status = r.status;
          if (r.has_header("Content-Length")) {
            try {
              expected = std::stoull(r.get_header_value("Content-Length"));
            } catch (const std::exception&) {
              expected.reset();
            }
          }
          return status == 200;
        },
        [&](const char* data, std::size_t len) {
          out.write(data, static_cast<std::streamsize>(len));
          received += len;
          if (!out) {
            write_failed = true;
            return false;
          }
          if (Clock::now() - start > std::chrono::milliseconds(cfg.timeout_ms)) {
            timed_out = true;
            return false;
          }
          return true;
        });
    out.close();

    auto discard = [&] { fs::remove(part, ec); };
    if (status != 0 && is_redirect(status)) {
      discard();
      current = next_location(current, res ? res->headers : httplib::Headers{}, status);
      continue;
    }
    if (status != 0 && status != 200) {
      discard();
      throw Error(ErrorCode::HttpError, current + ": HTTP " + std::to_string(status));
    }
    if (write_failed) {
      discard();
      throw Error(ErrorCode::IoError, "write failed for " + part.string());
    }
    if (timed_out) {
      discard();
      throw Error(ErrorCode::Timeout, current + ": download exceeded " + std::to_string(cfg.timeout_ms) + " ms");
    }
    if (expected && received != *expected) {
      discard();
      throw Error(ErrorCode::SizeMismatch, current + ": received " + std::to_string(received) + " of " +
                                               std::to_string(*expected) + " bytes");
    }
    if (!res) {
      discard();
      transport_failure(res.error(), current, start, cfg);
    }

    const std::uint64_t size = expected ? *expected : wait_for_stable_size(part, cfg, start);
    if (fs::file_size(part) != size) {
      discard();
      throw Error(ErrorCode::SizeMismatch, part.string() + " size changed after completion");
    }
    DownloadRecord record{url, final_path, size, sha256_file(part), now_iso8601(), status};
    fs::rename(part, final_path, ec);
    if (ec) {
      discard();
      throw Error(ErrorCode::IoError, "rename to " + final_path.string() + " failed: " + ec.message());
    }
    write_file_atomic(sidecar, to_json(record).dump(2) + "\n");
    return record;
  }
  throw Error(ErrorCode::TooManyRedirects, url + ": more than " + std::to_string(kMaxRedirects) + " redirects");
}

// --- rasterization ---------------------------------------------------------------

std::string page_file_name(int page) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "page-%03d.png", page);
  return buf;
}

namespace {

// Natural order: embedded digit runs compare numerically.
bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i;
      std::size_t je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      const std::string_view da = std::string_view(a).substr(i, ie - i);
      const std::string_view db = std::string_view(b).substr(j, je - j);
      const auto na = da.find_first_not_of('0');
      const auto nb = db.find_first_not_of('0');
      const std::string_view ta = na == std::string_view::npos ? "" : da.substr(na);
      const std::string_view tb = nb == std::string_view::npos ? "" : db.substr(nb);
      if (ta.size() != tb.size()) return ta.size() < tb.size();
      if (ta != tb) return ta < tb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

}  // namespace

std::vector<fs::path> rasterize_pdf(const fs::path& pdf, int dpi, const fs::path& out_dir,
                                    std::string_view command_template) {
  if (dpi < 1) throw Error(ErrorCode::ConfigError, "dpi must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  const fs::path staging = out_dir / ".staging";
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);

  const auto argv = substitute(split_command(command_template),
                               {{"input", pdf.string()}, {"outdir", staging.string()}, {"dpi", std::to_string(dpi)}});
  if (argv.empty()) throw Error(ErrorCode::ConfigError, "empty rasterizer command");
  ProcessResult r;
  if (!run_process(argv, r)) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::RasterizerNotFound, "rasterizer '" + argv[0] + "' not found");
  }
  if (r.exit_code != 0) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::RasterizerFailed, argv[0] + " exited with " + std::to_string(r.exit_code) + ": " + r.err);
  }

  std::vector<std::string> produced;
  for (const auto& entry : fs::directory_iterator(staging)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") produced.push_back(entry.path().filename().string());
  }
  if (produced.empty()) {
    fs::remove_all(staging, ec);
    throw Error(ErrorCode::NoPagesProduced, pdf.string() + ": rasterizer wrote no PNG pages");
  }
  std::sort(produced.begin(), produced.end(), natural_less);

  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string fn = entry.path().filename().string();
    if (fn.rfind("page-", 0) == 0 && entry.path().extension() == ".png") fs::remove(entry.path(), ec);
  }
  std::vector<fs::path> pages;
  for (std::size_t i = 0; i < produced.size(); ++i) {
    const fs::path dst = out_dir / page_file_name(static_cast<int>(i));
    fs::rename(staging / produced[i], dst, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot move page to " + dst.string() + ": " + ec.message());
    pages.push_back(dst);
  }
  fs::remove_all(staging, ec);
  return pages;
}

}  // namespace tender::fetch

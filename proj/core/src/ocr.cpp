#include "tender/ocr.hpp"

#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <charconv>
#include <cmath>
#include <cstdio>

#include "tender/error.hpp"
#include "tender/fsutil.hpp"
#include "tender/process.hpp"

namespace tender::ocr {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + why);
}

int parse_int(std::string_view s, std::size_t line_no, std::string_view column) {
  int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) {
    malformed(line_no, "bad " + std::string(column) + " '" + std::string(s) + "'");
  }
  return v;
}

// [-]digits[.digits] only.
double parse_conf(std::string_view s, std::size_t line_no, int& decimals) {
  std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
  std::size_t digits = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i, ++digits;
  decimals = 0;
  bool ok = digits > 0;
  if (ok && i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i, ++decimals;
    ok = decimals > 0;
  }
  double v = 0.0;
  if (ok && i == s.size()) {
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    ok = ec == std::errc{} && end == s.data() + s.size();
  } else {
    ok = false;
  }
  if (!ok) malformed(line_no, "bad conf '" + std::string(s) + "'");
  if (v < -1.0 || v > 100.0) malformed(line_no, "conf " + std::string(s) + " outside [-1, 100]");
  return v;
}

}  // namespace

std::vector<OcrToken> parse_ocr_tsv(std::string_view text) {
  static const char* const kColumns[] = {"level", "page_num", "block_num", "par_num", "line_num",
                                         "word_num", "left", "top", "width", "height"};
  std::vector<OcrToken> tokens;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_no == 1 && line == kTsvHeader) continue;

    const auto f = split_tabs(line);
    if (f.size() != 12) malformed(line_no, "expected 12 columns, found " + std::to_string(f.size()));
    OcrToken t;
    int* ints[] = {&t.level, &t.page_num, &t.block_num, &t.par_num, &t.line_num,
                   &t.word_num, &t.left, &t.top, &t.width, &t.height};
    for (std::size_t c = 0; c < 10; ++c) *ints[c] = parse_int(f[c], line_no, kColumns[c]);
    if (t.width < 0 || t.height < 0) malformed(line_no, "negative width or height");
    t.conf = parse_conf(f[10], line_no, t.conf_decimals);
    t.text = std::string(f[11]);
    tokens.push_back(std::move(t));
  }
  return tokens;
}

std::string serialize_ocr_tsv(const std::vector<OcrToken>& tokens) {
  std::string out(kTsvHeader);
  out.push_back('\n');
  char conf[64];
  for (const auto& t : tokens) {
    for (int v : {t.level, t.page_num, t.block_num, t.par_num, t.line_num, t.word_num, t.left, t.top, t.width,
                  t.height}) {
      out += std::to_string(v);
      out.push_back('\t');
    }
    std::snprintf(conf, sizeof(conf), "%.*f", t.conf_decimals, t.conf);
    out += conf;
    out.push_back('\t');
    out += t.text;
    out.push_back('\n');
  }
  return out;
}

std::string normalize_token(std::string_view s) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  u.foldCase(U_FOLD_CASE_DEFAULT);
  auto strip = [](UChar32 c) { return u_ispunct(c) || u_isUWhiteSpace(c) || u_iscntrl(c); };
  int32_t begin = 0;
  int32_t end = u.length();
  while (begin < end && strip(u.char32At(begin))) begin = u.moveIndex32(begin, 1);
  while (end > begin) {
    const int32_t prev = u.moveIndex32(end, -1);
    if (!strip(u.char32At(prev))) break;
    end = prev;
  }
  std::string out;
  u.tempSubStringBetween(begin, end).toUTF8String(out);
  return out;
}

KeywordSet parse_keywords(std::string_view text) {
  KeywordSet set;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;
    std::string kw = normalize_token(line);
    if (!kw.empty()) set.insert(std::move(kw));
  }
  if (set.empty()) throw Error(ErrorCode::EmptyKeywordSet, "keyword list has no entries");
  return set;
}

KeywordSet load_keywords(const std::filesystem::path& path) {
  try {
    return parse_keywords(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyKeywordSet) {
      throw Error(ErrorCode::EmptyKeywordSet, path.string() + " has no keywords");
    }
    throw;
  }
}

TenderDecision is_tender(const std::vector<OcrToken>& tokens, const KeywordSet& keywords, int min_common,
                         double min_conf) {
  std::set<std::string> words;
  for (const auto& t : tokens) {
    if (t.structural() || t.conf < min_conf) continue;
    std::string w = normalize_token(t.text);
    if (!w.empty()) words.insert(std::move(w));
  }
  TenderDecision d;
  d.min_common = min_common;
  for (const auto& w : words) {
    if (keywords.count(w)) d.matched.insert(w);
  }
  d.common_count = static_cast<int>(d.matched.size());
  d.is_tender = d.common_count >= min_common;
  return d;
}

std::vector<OcrToken> run_ocr(const std::filesystem::path& image, std::string_view command_template) {
  const auto argv = substitute(split_command(command_template), {{"input", image.string()}});
  if (argv.empty()) throw Error(ErrorCode::ConfigError, "empty OCR command");
  ProcessResult r;
  if (!run_process(argv, r)) throw Error(ErrorCode::EngineNotFound, "OCR engine '" + argv[0] + "' not found");
  if (r.exit_code != 0) {
    throw Error(ErrorCode::EngineFailed, argv[0] + " exited with " + std::to_string(r.exit_code) + ": " + r.err);
  }
  return parse_ocr_tsv(r.out);
}

}  // namespace tender::ocr

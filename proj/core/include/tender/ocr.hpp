#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tender::ocr {

// One row of the engine's word table.
struct OcrToken {
  int level = 0;
  int page_num = 0;
  int block_num = 0;
  int par_num = 0;
  int line_num = 0;
  int word_num = 0;
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
  double conf = -1.0;
  std::string text;
  int conf_decimals = 0;  // digits after the point as written; keeps re-serialization exact

  bool structural() const { return conf == -1.0; }
  bool operator==(const OcrToken&) const = default;
};

inline constexpr std::string_view kTsvHeader =
    "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext";

// The header row is optional. Throws MalformedRow naming the 1-based line.
std::vector<OcrToken> parse_ocr_tsv(std::string_view text);

// Header plus one LF-terminated line per token.
std::string serialize_ocr_tsv(const std::vector<OcrToken>& tokens);

// Unicode case fold, then strip leading/trailing punctuation and whitespace.
std::string normalize_token(std::string_view s);

using KeywordSet = std::set<std::string>;

// One keyword per line; '#' comments and blank lines skipped. Throws
// FileUnreadable or EmptyKeywordSet.
KeywordSet load_keywords(const std::filesystem::path& path);
KeywordSet parse_keywords(std::string_view text);

struct TenderDecision {
  bool is_tender = false;
  std::set<std::string> matched;
  int common_count = 0;
  int min_common = 0;
};

inline constexpr int kDefaultMinCommon = 3;
inline constexpr double kDefaultMinConf = 40.0;

// Set intersection of confident, normalized token texts with the keywords;
// tender when at least `min_common` distinct keywords are present.
TenderDecision is_tender(const std::vector<OcrToken>& tokens, const KeywordSet& keywords,
                         int min_common = kDefaultMinCommon, double min_conf = kDefaultMinConf);

// Runs the engine command (placeholder {input}) and parses its stdout.
// Throws EngineNotFound, EngineFailed (with the engine's stderr) or MalformedRow.
std::vector<OcrToken> run_ocr(const std::filesystem::path& image, std::string_view command_template);

}  // namespace tender::ocr

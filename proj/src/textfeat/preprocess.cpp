#include "ccd/textfeat/preprocess.hpp"

#include <fstream>
#include <sstream>

#include "ccd/common/error.hpp"

namespace ccd::text {

namespace detail {
extern const std::string_view kContractionTable;
}

namespace {

constexpr std::string_view kCurlyApostrophe = "\xE2\x80\x99";  // U+2019

bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_word_char(char c) { return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char ascii_lower(char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

std::string normalize_apostrophes(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s.substr(i, kCurlyApostrophe.size()) == kCurlyApostrophe) {
      out += '\'';
      i += kCurlyApostrophe.size();
    } else {
      out += s[i++];
    }
  }
  return out;
}

/// Step 1: special characters become spaces, whitespace runs collapse.
std::vector<std::string> clean_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : normalize_apostrophes(text)) {
    if (c == '[' || c == ']' || c == '{' || c == '}' || is_space(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// Splits an expansion into lowercase tokens.
void emit_expansion(const std::string& expansion, std::vector<std::string>& out) {
  std::string cur;
  for (char c : expansion) {
    if (is_word_char(c)) {
      cur += ascii_lower(c);
    } else if (c != '\'' && !cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
}

/// Steps 2-4 for one run of word characters and apostrophes. The stripped
/// form is looked up again so that "wan'na" expands like "wanna", which
/// keeps preprocess idempotent.
void emit_run(const std::string& run, const ContractionTable& table, std::vector<std::string>& out) {
  if (const std::string* hit = table.find(run)) return emit_expansion(*hit, out);
  const auto first = run.find_first_not_of('\'');
  if (first != std::string::npos) {
    const auto last = run.find_last_not_of('\'');
    if (const std::string* hit = table.find(std::string_view(run).substr(first, last - first + 1))) {
      return emit_expansion(*hit, out);
    }
  }
  std::string bare;
  for (char c : run)
    if (c != '\'') bare += ascii_lower(c);
  if (bare.empty()) return;
  if (const std::string* hit = table.find(bare)) return emit_expansion(*hit, out);
  out.push_back(std::move(bare));
}

}  // namespace

ContractionTable ContractionTable::parse(std::string_view tsv) {
  ContractionTable t;
  std::istringstream in{std::string(tsv)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw ParseError(n, "contraction table entry needs 'contraction<TAB>expansion'");
    }
    t.entries_[lower(normalize_apostrophes(line.substr(0, tab)))] = line.substr(tab + 1);
  }
  return t;
}

ContractionTable ContractionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open contraction table " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const ContractionTable& ContractionTable::builtin() {
  static const ContractionTable table = parse(detail::kContractionTable);
  return table;
}

const std::string* ContractionTable::find(std::string_view word) const {
  auto it = entries_.find(lower(normalize_apostrophes(word)));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> preprocess(std::string_view text, const ContractionTable& table) {
  std::vector<std::string> tokens;
  for (const std::string& word : clean_words(text)) {
    std::string run;
    for (char c : word) {
      if (is_word_char(c) || c == '\'') {
        run += c;
      } else if (!run.empty()) {
        emit_run(run, table, tokens);
        run.clear();
      }
    }
    if (!run.empty()) emit_run(run, table, tokens);
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace ccd::text

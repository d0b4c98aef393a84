#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ccd::text {

/// Contraction -> expansion lookup. Keys are stored lowercase; lookup is
/// case-insensitive and treats the typographic apostrophe as ASCII.
class ContractionTable {
 public:
  ContractionTable() = default;

  /// Tab-separated "contraction<TAB>expansion" lines; '#' starts a comment.
  static ContractionTable parse(std::string_view tsv);
  static ContractionTable load(const std::filesystem::path& path);
  /// The table shipped with the engine (data/contractions.tsv).
  static const ContractionTable& builtin();

  const std::string* find(std::string_view word) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Strip "[]{}" and redundant whitespace, expand contractions, split on
/// whitespace and punctuation, lowercase. Apostrophes left after expansion
/// are dropped ("pair's" -> "pairs"). Bytes >= 0x80 are word characters.
std::vector<std::string> preprocess(std::string_view text,
                                    const ContractionTable& table = ContractionTable::builtin());

std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

}  // namespace ccd::text

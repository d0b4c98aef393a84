#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "ccd/datamodel/types.hpp"

namespace ccd::data {

/// Declared width of one numeric record field.
struct FieldSpec {
  std::string feature_set;  // e.g. "loudness"; empty when unnamed
  std::size_t dim = 0;

  bool operator==(const FieldSpec&) const = default;
};

/// Sidecar schema for a feature file: field name -> declared width.
struct FeatureManifest {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  std::map<std::string, FieldSpec> fields;

  /// Throws SchemaError when a named feature set disagrees with its known width
  /// or a field name is not a record field.
  void validate() const;

  bool operator==(const FeatureManifest&) const = default;
};

std::string manifest_to_json(const FeatureManifest& manifest);
FeatureManifest manifest_from_json(const std::string& text);

/// "<dir>/<stem>.manifest.json" next to a feature file.
std::filesystem::path manifest_path_for(const std::filesystem::path& feature_file);

/// Reads a JSON-lines feature file, checking every record against the manifest.
/// Parse failures raise ParseError (1-based line); width mismatches raise
/// SchemaError naming the field and the expected width.
Corpus load_corpus(const std::filesystem::path& path, const FeatureManifest& manifest);
/// Same, using the sidecar manifest; when none exists the widths are inferred
/// from the first record carrying each field and enforced on the rest.
Corpus load_corpus(const std::filesystem::path& path);
Corpus read_corpus(std::istream& in, const FeatureManifest& manifest);

/// Writes the feature file and its sidecar manifest.
void save_corpus(const std::filesystem::path& path, const Corpus& corpus, const FeatureManifest& manifest);
void write_corpus(std::ostream& out, const Corpus& corpus);

/// Manifest describing the fields actually present in a corpus (no feature-set names).
FeatureManifest infer_manifest(const Corpus& corpus);

}  // namespace ccd::data

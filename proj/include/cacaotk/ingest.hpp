#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cacaotk/util.hpp"

namespace cacaotk {

enum class LegacyFormat { json, yaml };

enum class VendorHint { phantom, fortinet, demisto, other };

std::string_view vendor_hint_token(VendorHint hint);
std::optional<VendorHint> parse_vendor_hint(std::string_view token);

struct LegacyDocument {
  std::string raw_text;  // exact bytes from disk
  // What prompts embed: raw_text with a UTF-8 BOM stripped, otherwise
  // untouched so the model sees exactly what an analyst would.
  std::string payload;
  LegacyFormat format = LegacyFormat::json;
  OrderedJson parsed;  // faithful generic tree (YAML converted)
  std::optional<VendorHint> vendor_hint;
};

// Auto-detects JSON vs YAML (extension first, then content sniffing).
// Throws UnreadableFile and UnparseableContent.
LegacyDocument load_legacy(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path legacy_path;
  std::optional<std::filesystem::path> reference_path;
  std::optional<VendorHint> vendor_hint;
  std::string name;  // stem of the legacy file, used in aggregate tables
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // order-preserving

  size_t size() const { return entries.size(); }
};

// Loads a dataset manifest: {"entries": [{"legacy": path, "reference"?: path,
// "vendor"?: token}]}. Paths resolve relative to the manifest's directory and
// must exist; a missing `reference` key is legal at load time (evaluation
// rejects such entries later). Throws MalformedManifest and MissingFile.
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace cacaotk

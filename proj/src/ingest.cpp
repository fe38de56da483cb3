#include "cacaotk/ingest.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>

#include "cacaotk/errors.hpp"

namespace cacaotk {

namespace {

constexpr std::array<std::string_view, 4> kVendorTokens = {"phantom", "fortinet",
                                                           "demisto", "other"};

std::string strip_bom(std::string text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB &&
      static_cast<unsigned char>(text[2]) == 0xBF)
    text.erase(0, 3);
  return text;
}

OrderedJson yaml_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
      return nullptr;
    case YAML::NodeType::Scalar: {
      // Quoted scalars stay strings; plain scalars take their natural type.
      if (node.Tag() == "!") return node.as<std::string>();
      if (bool b; YAML::convert<bool>::decode(node, b)) {
        const std::string& raw = node.Scalar();
        if (raw == "true" || raw == "false") return b;
      }
      if (long long i; YAML::convert<long long>::decode(node, i)) return i;
      if (double d; YAML::convert<double>::decode(node, d)) return d;
      return node.as<std::string>();
    }
    case YAML::NodeType::Sequence: {
      OrderedJson list = OrderedJson::array();
      for (const auto& item : node) list.push_back(yaml_to_json(item));
      return list;
    }
    case YAML::NodeType::Map: {
      OrderedJson obj = OrderedJson::object();
      for (const auto& item : node)
        obj[item.first.as<std::string>()] = yaml_to_json(item.second);
      return obj;
    }
    default:
      return nullptr;
  }
}

std::optional<VendorHint> sniff_vendor(const std::filesystem::path& path) {
  const std::string stem = to_lower(path.filename().string());
  if (stem.find("phantom") != std::string::npos) return VendorHint::phantom;
  if (stem.find("fortinet") != std::string::npos) return VendorHint::fortinet;
  if (stem.find("demisto") != std::string::npos) return VendorHint::demisto;
  return std::nullopt;
}

bool try_parse_json(const std::string& text, OrderedJson& out) {
  try {
    out = OrderedJson::parse(text);
    return true;
  } catch (const OrderedJson::parse_error&) {
    return false;
  }
}

bool try_parse_yaml(const std::string& text, OrderedJson& out) {
  try {
    YAML::Node node = YAML::Load(text);
    if (!node.IsMap() && !node.IsSequence()) return false;
    out = yaml_to_json(node);
    return true;
  } catch (const YAML::Exception&) {
    return false;
  }
}

}  // namespace

std::string_view vendor_hint_token(VendorHint hint) {
  return kVendorTokens[static_cast<size_t>(hint)];
}

std::optional<VendorHint> parse_vendor_hint(std::string_view token) {
  for (size_t i = 0; i < kVendorTokens.size(); ++i)
    if (kVendorTokens[i] == token) return static_cast<VendorHint>(i);
  return std::nullopt;
}

LegacyDocument load_legacy(const std::filesystem::path& path) {
  LegacyDocument doc;
  doc.raw_text = read_file(path);
  doc.payload = strip_bom(doc.raw_text);
  doc.vendor_hint = sniff_vendor(path);

  if (doc.payload.find('\0') != std::string::npos)
    throw UnparseableContent(path.string() + " appears to be binary", "unknown");

  const std::string ext = to_lower(path.extension().string());
  const std::string head = trim(doc.payload.substr(0, 64));
  const bool looks_like_json = !head.empty() && (head[0] == '{' || head[0] == '[');

  bool prefer_json = ext == ".json" || (ext != ".yml" && ext != ".yaml" &&
                                        looks_like_json);
  if (prefer_json) {
    if (try_parse_json(doc.payload, doc.parsed)) {
      doc.format = LegacyFormat::json;
      return doc;
    }
    if (try_parse_yaml(doc.payload, doc.parsed)) {
      doc.format = LegacyFormat::yaml;
      return doc;
    }
    throw UnparseableContent(path.string() + " is not parseable JSON", "json");
  }
  if (try_parse_yaml(doc.payload, doc.parsed)) {
    doc.format = LegacyFormat::yaml;
    return doc;
  }
  if (try_parse_json(doc.payload, doc.parsed)) {
    doc.format = LegacyFormat::json;
    return doc;
  }
  throw UnparseableContent(path.string() + " is not parseable YAML or JSON",
                           "yaml");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(read_file(path));
  } catch (const OrderedJson::parse_error& e) {
    throw MalformedManifest("manifest " + path.string() +
                            " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") ||
      !doc.at("entries").is_array())
    throw MalformedManifest("manifest " + path.string() +
                            " must contain an entries array");
  if (doc.at("entries").empty())
    throw MalformedManifest("manifest " + path.string() +
                            " lists no entries; a dataset must be non-empty");

  const auto base = path.parent_path();
  DatasetManifest manifest;
  size_t index = 0;
  for (const auto& item : doc.at("entries")) {
    if (!item.is_object() || !item.contains("legacy") ||
        !item.at("legacy").is_string())
      throw MalformedManifest("manifest entry " + std::to_string(index) +
                              " lacks a legacy path");
    ManifestEntry entry;
    entry.legacy_path = base / item.at("legacy").get<std::string>();
    if (!std::filesystem::exists(entry.legacy_path))
      throw MissingFile("manifest entry " + std::to_string(index) +
                            ": missing legacy file " +
                            entry.legacy_path.string(),
                        index);
    if (item.contains("reference")) {
      entry.reference_path = base / item.at("reference").get<std::string>();
      if (!std::filesystem::exists(*entry.reference_path))
        throw MissingFile("manifest entry " + std::to_string(index) +
                              ": missing reference file " +
                              entry.reference_path->string(),
                          index);
    }
    if (item.contains("vendor")) {
      entry.vendor_hint = parse_vendor_hint(item.at("vendor").get<std::string>());
      if (!entry.vendor_hint)
        throw MalformedManifest("manifest entry " + std::to_string(index) +
                                ": unknown vendor token");
    }
    entry.name = entry.legacy_path.stem().string();
    manifest.entries.push_back(std::move(entry));
    ++index;
  }
  return manifest;
}

}  // namespace cacaotk

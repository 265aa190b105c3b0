#include "foldaug/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "foldaug/errors.hpp"
#include "json.hpp"

namespace foldaug {
namespace {

using nlohmann::json;

json box_to_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x0, y0, x1, y1]");
  return BoundingBox{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

std::optional<DistractorKind> parse_distractor_kind(std::string_view s) {
  for (int k = 0; k < kDistractorKindCount; ++k) {
    const auto kind = static_cast<DistractorKind>(k);
    if (to_string(kind) == s) return kind;
  }
  return std::nullopt;
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord r;
  r.image = j.at("image").get<std::string>();
  r.patient = j.at("patient").get<std::string>();
  r.split = j.value("split", std::string{});
  r.width = j.at("width").get<int>();
  r.height = j.at("height").get<int>();
  if (r.width < 1 || r.height < 1) throw std::invalid_argument("image dimensions must be positive");
  for (const auto& a : j.value("annotations", json::array())) {
    Annotation ann;
    ann.box = box_from_json(a.at("box"));
    const auto label = parse_class_label(a.at("label").get<std::string>());
    if (!label) throw std::invalid_argument("unknown class label");
    ann.label = *label;
    if (!ann.box.within(r.width, r.height)) {
      throw std::invalid_argument("annotation box outside image bounds");
    }
    r.annotations.push_back(ann);
  }
  for (const auto& d : j.value("debug_distractors", json::array())) {
    DistractorTag t;
    t.box = box_from_json(d.at("box"));
    const auto kind = parse_distractor_kind(d.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown distractor kind");
    t.kind = *kind;
    r.distractors.push_back(t);
  }
  return r;
}

}  // namespace

std::string_view to_string(DistractorKind kind) noexcept {
  switch (kind) {
    case DistractorKind::vertebral_ridge: return "vertebral-ridge";
    case DistractorKind::gathered_folds: return "gathered-folds";
    case DistractorKind::duodenal_banding: return "duodenal-banding";
    case DistractorKind::irregular_mucosa: return "irregular-mucosa";
    case DistractorKind::wall_change: return "wall-change";
  }
  return "unknown";
}

bool ManifestRecord::is_control() const noexcept {
  for (const auto& a : annotations) {
    if (a.label == ClassLabel::lesion) return false;
  }
  return true;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  json records = json::array();
  for (const auto& r : manifest.records) {
    json anns = json::array();
    for (const auto& a : r.annotations) {
      anns.push_back({{"box", box_to_json(a.box)}, {"label", std::string(to_string(a.label))}});
    }
    json rec = {{"image", r.image},   {"patient", r.patient},     {"split", r.split},
                {"width", r.width},   {"height", r.height},       {"annotations", anns}};
    if (!r.distractors.empty()) {
      json ds = json::array();
      for (const auto& d : r.distractors) {
        ds.push_back({{"box", box_to_json(d.box)}, {"kind", std::string(to_string(d.kind))}});
      }
      rec["debug_distractors"] = ds;
    }
    records.push_back(std::move(rec));
  }
  json root = {{"format_version", manifest.format_version}, {"records", records}};
  return root.dump(1) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("manifest root must be an object");

  DatasetManifest m;
  m.format_version = root.value("format_version", 0);
  if (m.format_version != DatasetManifest::kFormatVersion) {
    throw ParseError("unsupported manifest format version " + std::to_string(m.format_version));
  }
  const auto& records = root.contains("records") ? root["records"] : json::array();
  if (!records.is_array()) throw ParseError("manifest records must be an array");

  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      m.records.push_back(record_from_json(records[i]));
    } catch (const std::exception& e) {
      throw ParseError("manifest record " + std::to_string(i) + ": " + e.what(), i);
    }
    if (!seen.insert(m.records.back().image).second) {
      throw ParseError("manifest record " + std::to_string(i) + ": duplicate image path", i);
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << manifest_to_json(manifest);
  if (!out) throw IoError("write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

}  // namespace foldaug

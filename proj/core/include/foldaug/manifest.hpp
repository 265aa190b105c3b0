#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "foldaug/boxes.hpp"

namespace foldaug {

/// Structures planted by the generator that look lesion-like but carry no annotation.
enum class DistractorKind {
  vertebral_ridge,
  gathered_folds,
  duodenal_banding,
  irregular_mucosa,
  wall_change,
};

inline constexpr int kDistractorKindCount = 5;

std::string_view to_string(DistractorKind kind) noexcept;

/// Ground truth of a distractor. Kept out of training data; only tests and reports read it.
struct DistractorTag {
  BoundingBox box;
  DistractorKind kind = DistractorKind::vertebral_ridge;

  friend bool operator==(const DistractorTag&, const DistractorTag&) = default;
};

struct ManifestRecord {
  std::string image;  // path relative to the manifest's directory
  std::string patient;
  std::string split;  // "train", "validation", "test"
  int width = 0;
  int height = 0;
  std::vector<Annotation> annotations;
  std::vector<DistractorTag> distractors;

  bool is_control() const noexcept;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::vector<ManifestRecord> records;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// JSON text of the manifest. Output is stable: identical manifests give identical bytes.
std::string manifest_to_json(const DatasetManifest& manifest);

/// Parses and validates. Throws ParseError carrying the index of the first bad record.
DatasetManifest manifest_from_json(std::string_view text);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace foldaug

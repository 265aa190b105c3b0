#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "foldaug/image.hpp"
#include "foldaug/manifest.hpp"
#include "foldaug/random.hpp"

namespace foldaug::synthgen {

/// Parameters of the synthetic fold-texture corpus.
struct CorpusSpec {
  int width = 512;
  int height = 512;
  int patients = 10;
  int images_per_patient = 8;
  /// Exactly round(fraction * total images) images receive lesions.
  double lesion_fraction = 0.6;
  int lesions_per_image = 1;
  double lesion_radius_min = 20.0;
  double lesion_radius_max = 38.0;

  double fold_spacing_min = 16.0;
  double fold_spacing_max = 26.0;
  double fold_amplitude_min = 22.0;
  double fold_amplitude_max = 38.0;
  double base_intensity_min = 95.0;
  double base_intensity_max = 135.0;

  int distractors_min = 1;
  int distractors_max = 3;
  /// Relative frequency of each distractor kind, in DistractorKind order. Must sum to 1.
  std::array<double, kDistractorKindCount> distractor_mix{0.2, 0.2, 0.2, 0.2, 0.2};

  double noise_sigma = 5.0;
  /// The last `validation_patients` patients get split "validation", the `test_patients`
  /// before them "test", and the rest "train".
  int validation_patients = 3;
  int test_patients = 0;
  std::uint64_t seed = 20230101;

  void validate() const;
};

struct GeneratedImage {
  ManifestRecord record;
  GrayImage image;
};

/// Renders one image. With `include_lesions` false the lesion patches are skipped but every
/// other random decision is unchanged, so the difference isolates the lesion pixels.
GeneratedImage render_image(const CorpusSpec& spec, int index, bool include_lesions = true);

/// Whole corpus in memory, in patient-major order.
std::vector<GeneratedImage> generate_images(const CorpusSpec& spec);

/// Writes `<out>/corpus/<patient>/<image>.png` and `<out>/manifest.json`.
DatasetManifest generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

struct SplitSummary {
  std::size_t images = 0;
  std::size_t control_images = 0;
  std::size_t lesion_annotations = 0;
  std::size_t hard_annotations = 0;

  friend bool operator==(const SplitSummary&, const SplitSummary&) = default;
};

struct CorpusSummary {
  std::size_t images = 0;
  std::size_t patients = 0;
  std::size_t control_images = 0;
  std::size_t lesion_annotations = 0;
  std::size_t hard_annotations = 0;
  std::size_t distractors = 0;
  /// Annotation counts by longest box side: [0,32), [32,64), [64,128), [128,256), [256,inf).
  std::array<std::size_t, 5> box_size_histogram{};
  std::map<std::string, SplitSummary> per_split;

  friend bool operator==(const CorpusSummary&, const CorpusSummary&) = default;
};

CorpusSummary describe_corpus(const DatasetManifest& manifest);

/// Human-readable multi-line rendering of a summary.
std::string format_summary(const CorpusSummary& summary);

}  // namespace foldaug::synthgen

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "foldaug/detector.hpp"
#include "foldaug/evalkit.hpp"
#include "foldaug/hbbt.hpp"
#include "foldaug/kv_config.hpp"
#include "foldaug/manifest.hpp"
#include "foldaug/synthgen.hpp"

namespace foldaug::cli {

/// A manifest with its decoded images, in record order.
struct Corpus {
  DatasetManifest manifest;
  std::vector<GrayImage> images;
};

Corpus load_corpus(const std::filesystem::path& manifest_path);
Corpus corpus_from_generated(std::vector<synthgen::GeneratedImage> generated);

/// Views into a corpus. `positives` are training images with lesions, `controls` lesion-free
/// training images, `held_out` every image of the requested evaluation split.
struct Splits {
  std::vector<detector::LabeledImage> positives;
  std::vector<detector::LabeledImage> controls;
  std::vector<detector::LabeledImage> held_out;
  std::vector<std::size_t> positive_records;
  std::vector<std::size_t> control_records;
  std::vector<std::size_t> held_out_records;
};

Splits make_splits(const Corpus& corpus, std::string_view train_split = "train",
                   std::string_view eval_split = "validation");

/// Splits by a fold assignment: records of patients in `fold` are held out.
Splits make_fold_splits(const Corpus& corpus, const evalkit::FoldSplit& split, int fold);

enum class Mode { baseline, rsgaia, hbbt, rsgaia_hbbt };

Mode parse_mode(std::string_view text);
std::string_view to_string(Mode mode) noexcept;
bool uses_augmentation(Mode mode) noexcept;
bool uses_hbbt(Mode mode) noexcept;

struct TrainOutcome {
  std::shared_ptr<const detector::Model> model;
  /// One row per round; a single round-0 row without the hard-box loop.
  std::vector<hbbt::RoundRecord> log;
  /// Held-out metrics of the returned model at the working threshold.
  evalkit::MetricsReport validation;
  std::optional<hbbt::HbbtState> state;
};

/// Trains in one of the four ablation modes. Without the hard-box loop only `positives` are
/// used; the loop also mines `controls`.
TrainOutcome train_mode(const Splits& splits, Mode mode, const config::RunSettings& settings,
                        RngSeed seed, const hbbt::RoundCallback& on_round = {});

struct FoldReport {
  int fold = 0;
  std::size_t images = 0;
  evalkit::MetricsReport report;
};

struct CrossValidation {
  std::vector<FoldReport> folds;
  evalkit::MetricsReport aggregate;
};

/// Trains one model per patient fold and scores its held-out images. The aggregate sums
/// per-fold counts.
CrossValidation cross_validate(const Corpus& corpus, Mode mode, const config::RunSettings& settings,
                               RngSeed seed);

}  // namespace foldaug::cli

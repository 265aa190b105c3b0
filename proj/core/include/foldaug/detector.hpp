#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "foldaug/boxes.hpp"
#include "foldaug/image.hpp"
#include "foldaug/random.hpp"

namespace foldaug::detector {

/// One training or evaluation image with its annotations. Holds a non-owning pointer so that
/// datasets can be assembled from shared images without copying pixels.
struct LabeledImage {
  const GrayImage* image = nullptr;
  std::vector<Annotation> annotations;
};

/// Produces a training view of an image. Called once per image per epoch.
using AugmentHook = std::function<GrayImage(const GrayImage&, RngSeed)>;

/// The detector contract the hard-box loop runs against. A trained model is immutable and may
/// be shared across threads.
class Model {
public:
  virtual ~Model() = default;

  /// Classes the model can emit, lesion first.
  virtual const std::vector<ClassLabel>& classes() const = 0;

  /// Detections with confidence >= min_confidence, per-class NMS applied, sorted by
  /// descending confidence. Throws DomainError if min_confidence is outside [0, 1].
  virtual std::vector<Detection> infer(const GrayImage& img, double min_confidence) const = 0;

  /// Checkpoint bytes. Loading them back must reproduce inference exactly.
  virtual std::vector<std::uint8_t> serialize() const = 0;
};

class Trainer {
public:
  virtual ~Trainer() = default;

  /// Deterministic given (dataset order, hyperparameters, seed). `augment` may be empty.
  virtual std::shared_ptr<const Model> train(std::span<const LabeledImage> dataset,
                                             const AugmentHook& augment, RngSeed seed) const = 0;
};

/// Greedy per-class suppression in descending confidence order. A detection is dropped when its
/// IoU with an already kept detection of the same class is >= iou_threshold.
std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold);

// ---------------------------------------------------------------------------------------------
// Reference detector: dense square windows at several scales, pooled intensity and gradient
// statistics per window, softmax-linear classifier over {background} + classes.

struct DetectorHyper {
  std::vector<int> window_sizes{40, 60, 90};
  double stride_fraction = 0.25;
  double nms_iou = 0.5;
  /// Windows with IoU >= positive_iou against an annotation take its class.
  double positive_iou = 0.7;
  /// Windows with IoU < background_iou against every annotation are background.
  double background_iou = 0.1;
  int epochs = 3;
  int background_per_image = 48;
  /// Windows overlapping an annotation below positive_iou (but not below background_iou) drawn
  /// per image as extra background.
  int partial_per_image = 16;
  int bootstrap_rounds = 1;
  int bootstrap_per_image = 16;
  int iterations = 400;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  /// Total sample weight of each object class relative to the background class.
  double object_class_weight = 1.0;
  /// Detections below this confidence are never emitted.
  double score_floor = 0.02;

  void validate() const;

  friend bool operator==(const DetectorHyper&, const DetectorHyper&) = default;
};

/// Number of per-window features.
std::size_t feature_dimension();

class SlidingWindowModel final : public Model {
public:
  SlidingWindowModel(DetectorHyper hyper, std::vector<ClassLabel> classes,
                     std::vector<double> feature_mean, std::vector<double> feature_scale,
                     std::vector<double> weights);

  const std::vector<ClassLabel>& classes() const override { return classes_; }
  std::vector<Detection> infer(const GrayImage& img, double min_confidence) const override;
  std::vector<std::uint8_t> serialize() const override;

  static std::shared_ptr<const SlidingWindowModel> deserialize(std::span<const std::uint8_t> bytes);

  const DetectorHyper& hyper() const noexcept { return hyper_; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// Training round recorded in the checkpoint. The hard-box loop stamps it.
  std::uint32_t round() const noexcept { return round_; }
  std::uint64_t seed() const noexcept { return seed_; }
  void set_metadata(std::uint32_t round, std::uint64_t seed) noexcept {
    round_ = round;
    seed_ = seed;
  }

  /// Class probabilities (background first) for every window, for diagnostics.
  std::vector<double> window_scores(std::span<const double> features) const;

private:
  DetectorHyper hyper_;
  std::vector<ClassLabel> classes_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<double> weights_;  // (classes + 1) rows of (features + 1) columns, bias last
  std::uint32_t round_ = 0;
  std::uint64_t seed_ = 0;
};

class SlidingWindowTrainer final : public Trainer {
public:
  explicit SlidingWindowTrainer(DetectorHyper hyper = {});

  std::shared_ptr<const Model> train(std::span<const LabeledImage> dataset,
                                     const AugmentHook& augment, RngSeed seed) const override;

  const DetectorHyper& hyper() const noexcept { return hyper_; }

private:
  DetectorHyper hyper_;
};

/// Reference-detector training. Throws TrainingError when the dataset has no lesion annotation
/// or holds a degenerate or out-of-bounds box (the error carries the running annotation index).
std::shared_ptr<const SlidingWindowModel> train(std::span<const LabeledImage> dataset,
                                                const AugmentHook& augment,
                                                const DetectorHyper& hyper, RngSeed seed);

std::vector<Detection> infer(const Model& model, const GrayImage& img, double min_confidence);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
std::shared_ptr<const SlidingWindowModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace foldaug::detector

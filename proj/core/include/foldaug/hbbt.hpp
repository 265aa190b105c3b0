#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "foldaug/boxes.hpp"
#include "foldaug/detector.hpp"
#include "foldaug/evalkit.hpp"
#include "foldaug/random.hpp"

namespace foldaug::hbbt {

struct HbbtConfig {
  double tau_fp = 0.5;
  double xi_hard = 0.5;
  double tau_dup = 0.7;
  int max_rounds = 10;
  int patience = 2;
  int per_image_cap = 8;
  /// Confidence threshold for validation F1 and control false-positive counts.
  double eval_xi = 0.5;
  double match_iou = 0.5;

  void validate() const;

  friend bool operator==(const HbbtConfig&, const HbbtConfig&) = default;
};

struct RoundRecord {
  int round = 0;
  std::size_t hard_boxes_total = 0;
  std::size_t new_hard_boxes = 0;
  evalkit::MetricsReport validation;
  /// Lesion-class detections at eval_xi on control images.
  std::size_t control_false_positives = 0;
  double wall_seconds = 0.0;
};

struct HbbtState {
  int round = 0;
  /// Indexed like train_set followed by control_set.
  std::vector<std::vector<Annotation>> hard_pool;
  std::vector<std::pair<int, double>> f1_history;
  int best_round = 0;
  std::shared_ptr<const detector::Model> best_model;
  std::vector<RoundRecord> log;

  std::size_t hard_pool_size() const;
};

struct HbbtResult {
  std::shared_ptr<const detector::Model> model;
  HbbtState state;
};

/// Lesion detections with confidence >= xi_hard and IoU < tau_fp against every lesion
/// annotation of the image, skipping any within tau_dup of a box already in `pool` or already
/// taken this call, at most per_image_cap per image (highest confidence first).
std::vector<Annotation> mine_hard_boxes(std::span<const Detection> detections,
                                        std::span<const Annotation> annotations,
                                        std::span<const Annotation> pool, const HbbtConfig& cfg);

/// Called after each round with the model that round produced.
using RoundCallback =
    std::function<void(const RoundRecord&, const detector::Model&, const HbbtState&)>;

/// Round 0 trains on lesion annotations of train_set. Each later round mines hard boxes with the
/// previous model over train_set and control_set, adds them to the pool, and retrains from
/// scratch with the same seed on train_set plus every control image holding a hard box.
/// Stops after max_rounds or when patience rounds pass without strict F1 improvement.
/// Training errors are rethrown as TrainingError carrying the round index.
HbbtResult run_hbbt(const detector::Trainer& trainer,
                    std::span<const detector::LabeledImage> train_set,
                    std::span<const detector::LabeledImage> control_set,
                    std::span<const detector::LabeledImage> validation_set,
                    const detector::AugmentHook& augment, const HbbtConfig& cfg, RngSeed seed,
                    const RoundCallback& on_round = {});

/// `round,train_hard_boxes_total,new_hard_boxes,validation_precision,validation_recall,
/// validation_f1,wall_seconds`
std::string format_round_log(std::span<const RoundRecord> log);

}  // namespace foldaug::hbbt

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foldaug/boxes.hpp"
#include "foldaug/detector.hpp"
#include "foldaug/manifest.hpp"
#include "foldaug/random.hpp"
#include "foldaug/rsgaia.hpp"

namespace foldaug::evalkit {

using foldaug::iou;

struct MatchedPair {
  std::size_t detection;
  std::size_t annotation;
  double iou;

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// Matching outcome for one image. Indices refer to the inputs of `match_boxes`.
struct ImageMatch {
  std::vector<MatchedPair> pairs;
  std::vector<std::size_t> false_positives;
  std::vector<std::size_t> false_negatives;

  friend bool operator==(const ImageMatch&, const ImageMatch&) = default;
};

/// Greedy one-to-one matching in descending confidence order (input order breaks confidence
/// ties). Each detection takes the unmatched annotation of highest IoU if that IoU reaches the
/// threshold; equal IoUs go to the lower annotation index. Only lesion-class detections and
/// lesion annotations take part; others are ignored entirely. A second detection on an already
/// matched annotation is a false positive.
ImageMatch match_boxes(std::span<const Detection> detections,
                       std::span<const Annotation> annotations, double iou_threshold);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double xi = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// precision = tp / (tp + fp), recall = tp / (tp + fn), each 0 on an empty denominator;
/// f1 is their harmonic mean, 0 unless both are nonzero.
MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, double xi);

/// Sums the per-image counts. Detections below `xi` must already be excluded.
MetricsReport compute_metrics(std::span<const ImageMatch> matches, double xi);

/// Keeps lesion detections with confidence >= xi.
std::vector<Detection> lesion_detections_at(std::span<const Detection> detections, double xi);

struct XiSelection {
  double xi = 0.0;
  MetricsReport report;
  /// False when no threshold reaches the target recall.
  bool target_reached = false;
};

/// Largest ξ among the distinct detection confidences whose recall reaches `target_recall`.
/// When unreachable, returns the smallest confidence with `target_reached` false. With no
/// detections at all, returns ξ = 0 with the flag false.
XiSelection select_xi(std::span<const std::vector<Detection>> detections,
                      std::span<const std::vector<Annotation>> annotations, double target_recall,
                      double iou_threshold);

struct FoldSplit {
  int folds = 0;
  std::map<std::string, int> patient_fold;

  int fold_of(const std::string& patient) const;
  friend bool operator==(const FoldSplit&, const FoldSplit&) = default;
};

/// Patients (sorted by id) are shuffled by the seed and dealt round-robin into k folds.
FoldSplit split_by_patient(const DatasetManifest& manifest, int k, RngSeed seed);

/// How detections are turned into a report.
struct EvalSettings {
  double iou_threshold = 0.5;
  /// Fixed threshold; when empty, ξ is chosen by `select_xi` for `target_recall`.
  std::optional<double> xi;
  double target_recall = 0.9;
};

struct Evaluation {
  MetricsReport report;
  bool target_reached = true;
  std::vector<std::vector<Detection>> detections;  // raw model output per image
  std::vector<ImageMatch> matches;                 // at the reported ξ
};

/// Runs the model over every image and scores lesion detections.
Evaluation evaluate(const detector::Model& model, std::span<const detector::LabeledImage> images,
                    const EvalSettings& settings);

/// Scores precomputed detections.
Evaluation evaluate_detections(std::vector<std::vector<Detection>> detections,
                               std::span<const std::vector<Annotation>> annotations,
                               const EvalSettings& settings);

struct SweepRow {
  double gamma = 0.0;
  MetricsReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double best_gamma = 0.0;
};

/// Trains once per γ with every other setting fixed (same seed), evaluates on the validation
/// images, and picks the γ of highest F1 (earliest on ties).
SweepResult gamma_sweep(std::span<const double> gammas, const rsgaia::AugmentConfig& base,
                        const detector::Trainer& trainer,
                        std::span<const detector::LabeledImage> train_set,
                        std::span<const detector::LabeledImage> validation_set,
                        const EvalSettings& settings, RngSeed seed);

/// CSV with header `gamma,precision,recall,f1,tp,fp,fn,xi,config_hash`.
std::string format_sweep_csv(const SweepResult& result, const std::string& config_hash);

/// CSV header shared by metrics reports.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& label, const MetricsReport& r,
                            const std::string& config_hash);

}  // namespace foldaug::evalkit

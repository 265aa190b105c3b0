#pragma once

#include <vector>

#include "foldaug/image.hpp"
#include "foldaug/imgcore.hpp"
#include "foldaug/random.hpp"

namespace foldaug::rsgaia {

enum class ProbabilityMode { sigmoid, step_table };

/// How the fold mask enters the output.
///  - regional: A = alpha * I_e + beta inside the mask, I_e elsewhere.
///  - literal:  A = I_e + alpha * G + beta at every pixel.
enum class CompositionMode { regional, literal };

/// One bucket of the legacy discrete probability curve: edge strengths up to and including
/// `upper` map to `probability`.
struct StepBucket {
  double upper;
  double probability;

  friend bool operator==(const StepBucket&, const StepBucket&) = default;
};

/// Five-step staircase approximating the legacy discrete curve. It is an eyeballed
/// approximation, not published data.
std::vector<StepBucket> default_step_table();

struct AugmentConfig {
  double gamma = 4.0;   // sigmoid slope
  double theta = 0.55;  // edge strength at which p = 0.5
  double alpha_min = 0.9;
  double alpha_max = 1.0;
  double beta_min = -15.0;
  double beta_max = -5.0;
  int open_radius = 1;
  ProbabilityMode probability_mode = ProbabilityMode::sigmoid;
  std::vector<StepBucket> step_table = default_step_table();
  CompositionMode composition_mode = CompositionMode::regional;

  double gradient_sigma = imgcore::kDefaultGradientSigma;
  double highpass_cutoff = imgcore::kDefaultHighpassCutoff;
  int highpass_order = imgcore::kDefaultHighpassOrder;

  /// Throws DomainError when any invariant is violated.
  void validate() const;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// E = (normalize01(gradient) + normalize01(highpass)) / 2 of the equalized image.
RealField edge_strength(const GrayImage& img, const AugmentConfig& cfg);

/// Same as `edge_strength` but for an image that is already equalized.
RealField edge_strength_of_equalized(const GrayImage& equalized, const AugmentConfig& cfg);

/// p(e) = 1 / (1 + exp(-gamma (e - theta))) in sigmoid mode; table lookup in step-table mode.
double fold_probability(double e, const AugmentConfig& cfg);

/// Applies `fold_probability` pixel-wise to a normalized edge field.
RealField probability_map(const RealField& edge, const AugmentConfig& cfg);

/// Independent Bernoulli draw per pixel, keyed by (seed, x, y). No morphology.
BinaryMask sample_raw_mask(const RealField& probability, RngSeed seed);

/// `sample_raw_mask` followed by morphological opening with cfg.open_radius.
BinaryMask sample_fold_mask(const RealField& probability, RngSeed seed, const AugmentConfig& cfg);

/// Combines the equalized image with the fold mask. Results are rounded and clamped to [0, 255].
GrayImage compose_enhanced(const GrayImage& equalized, const BinaryMask& mask, double alpha,
                           double beta, const AugmentConfig& cfg);

/// Every intermediate of one augmentation call.
struct AugmentTrace {
  GrayImage equalized;
  RealField edge;
  RealField probability;
  BinaryMask mask;
  double alpha = 0.0;
  double beta = 0.0;
  GrayImage output;
};

AugmentTrace augment_traced(const GrayImage& img, const AugmentConfig& cfg, RngSeed seed);

/// Full pipeline. (img, cfg, seed) determines the output bit-for-bit.
GrayImage augment(const GrayImage& img, const AugmentConfig& cfg, RngSeed seed);

}  // namespace foldaug::rsgaia

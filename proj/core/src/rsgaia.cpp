#include "foldaug/rsgaia.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foldaug/errors.hpp"

namespace foldaug::rsgaia {
namespace {

constexpr std::uint64_t kMaskStream = 1;
constexpr std::uint64_t kIntensityStream = 2;

std::uint8_t clamp_round(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

}  // namespace

std::vector<StepBucket> default_step_table() {
  return {{0.2, 0.05}, {0.4, 0.15}, {0.6, 0.40}, {0.8, 0.70}, {1.0, 0.90}};
}

void AugmentConfig::validate() const {
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("theta must lie in [0, 1]");
  if (!(alpha_min <= alpha_max) || alpha_min < 0.0 || alpha_max > 2.0) {
    throw DomainError("alpha range must be an interval within [0, 2]");
  }
  if (!(beta_min <= beta_max) || beta_min < -255.0 || beta_max > 255.0) {
    throw DomainError("beta range must be an interval within [-255, 255]");
  }
  if (open_radius < 1) throw DomainError("open radius must be >= 1");
  if (!(highpass_cutoff > 0.0 && highpass_cutoff <= 0.5)) {
    throw DomainError("high-pass cutoff must lie in (0, 0.5]");
  }
  if (highpass_order < 1) throw DomainError("high-pass order must be >= 1");
  if (!(gradient_sigma > 0.0)) throw DomainError("gradient sigma must be positive");
  if (probability_mode == ProbabilityMode::step_table) {
    if (step_table.empty()) throw DomainError("step table is empty");
    double prev = -1.0;
    for (const auto& b : step_table) {
      if (!(b.probability >= 0.0 && b.probability <= 1.0)) {
        throw DomainError("step table probabilities must lie in [0, 1]");
      }
      if (!(b.upper > prev)) throw DomainError("step table bounds must be strictly increasing");
      prev = b.upper;
    }
    if (step_table.back().upper != 1.0) throw DomainError("final step table bound must be 1");
  }
}

RealField edge_strength_of_equalized(const GrayImage& equalized, const AugmentConfig& cfg) {
  const RealField grad =
      imgcore::normalize01(imgcore::gradient_magnitude(equalized, cfg.gradient_sigma));
  const RealField high = imgcore::normalize01(
      imgcore::butterworth_highpass(equalized, cfg.highpass_cutoff, cfg.highpass_order));
  RealField e(equalized.width(), equalized.height());
  auto out = e.values();
  const auto g = grad.values();
  const auto h = high.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (g[i] + h[i]) / 2.0;
  e.mark_normalized();
  return e;
}

RealField edge_strength(const GrayImage& img, const AugmentConfig& cfg) {
  return edge_strength_of_equalized(imgcore::histogram_equalize(img), cfg);
}

double fold_probability(double e, const AugmentConfig& cfg) {
  if (!(e >= 0.0 && e <= 1.0)) {
    throw DomainError("edge strength " + std::to_string(e) + " outside [0, 1]");
  }
  if (cfg.probability_mode == ProbabilityMode::step_table) {
    for (const auto& b : cfg.step_table) {
      if (e <= b.upper) return b.probability;
    }
    return cfg.step_table.back().probability;
  }
  return 1.0 / (1.0 + std::exp(-cfg.gamma * (e - cfg.theta)));
}

RealField probability_map(const RealField& edge, const AugmentConfig& cfg) {
  if (!edge.normalized()) throw DomainError("probability map requires a normalized edge field");
  RealField p(edge.width(), edge.height());
  std::transform(edge.values().begin(), edge.values().end(), p.values().begin(),
                 [&](double e) { return fold_probability(e, cfg); });
  p.mark_normalized();
  return p;
}

BinaryMask sample_raw_mask(const RealField& probability, RngSeed seed) {
  if (!probability.normalized()) throw DomainError("mask sampling requires a normalized field");
  BinaryMask mask(probability.width(), probability.height());
  for (int y = 0; y < probability.height(); ++y) {
    for (int x = 0; x < probability.width(); ++x) {
      const double u =
          pixel_uniform(seed, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
      mask.set(x, y, u < probability(x, y));
    }
  }
  return mask;
}

BinaryMask sample_fold_mask(const RealField& probability, RngSeed seed, const AugmentConfig& cfg) {
  return imgcore::morphological_open(sample_raw_mask(probability, seed), cfg.open_radius);
}

GrayImage compose_enhanced(const GrayImage& equalized, const BinaryMask& mask, double alpha,
                           double beta, const AugmentConfig& cfg) {
  if (mask.width() != equalized.width() || mask.height() != equalized.height()) {
    throw DimensionError("fold mask and image dimensions differ");
  }
  if (!(alpha >= cfg.alpha_min && alpha <= cfg.alpha_max)) {
    throw DomainError("alpha outside the configured range");
  }
  if (!(beta >= cfg.beta_min && beta <= cfg.beta_max)) {
    throw DomainError("beta outside the configured range");
  }

  GrayImage out(equalized.width(), equalized.height());
  const auto in = equalized.pixels();
  const auto g = mask.bits();
  auto o = out.pixels();
  if (cfg.composition_mode == CompositionMode::regional) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      o[i] = g[i] ? clamp_round(alpha * in[i] + beta) : in[i];
    }
  } else {
    for (std::size_t i = 0; i < o.size(); ++i) {
      o[i] = clamp_round(in[i] + alpha * g[i] + beta);
    }
  }
  return out;
}

AugmentTrace augment_traced(const GrayImage& img, const AugmentConfig& cfg, RngSeed seed) {
  cfg.validate();
  AugmentTrace t;
  t.equalized = imgcore::histogram_equalize(img);
  t.edge = edge_strength_of_equalized(t.equalized, cfg);
  t.probability = probability_map(t.edge, cfg);
  t.mask = sample_fold_mask(t.probability, derive_seed(seed, kMaskStream), cfg);
  Rng rng(derive_seed(seed, kIntensityStream));
  t.alpha = rng.uniform(cfg.alpha_min, cfg.alpha_max);
  t.beta = rng.uniform(cfg.beta_min, cfg.beta_max);
  t.output = compose_enhanced(t.equalized, t.mask, t.alpha, t.beta, cfg);
  return t;
}

GrayImage augment(const GrayImage& img, const AugmentConfig& cfg, RngSeed seed) {
  return augment_traced(img, cfg, seed).output;
}

}  // namespace foldaug::rsgaia

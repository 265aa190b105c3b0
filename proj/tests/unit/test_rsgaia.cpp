#include <gtest/gtest.h>

#include <cmath>

#include "foldaug/errors.hpp"
#include "foldaug/imgcore.hpp"
#include "foldaug/rsgaia.hpp"
#include "foldaug/synthgen.hpp"

using namespace foldaug;
using namespace foldaug::rsgaia;

namespace {

GrayImage fold_image(int index = 0) {
  synthgen::CorpusSpec spec;
  spec.width = 128;
  spec.height = 128;
  spec.patients = 1;
  spec.images_per_patient = 4;
  spec.lesion_radius_min = 10;
  spec.lesion_radius_max = 14;
  spec.validation_patients = 0;
  return synthgen::render_image(spec, index).image;
}

GrayImage step_image() {
  GrayImage img(16, 16, 30);
  for (int y = 0; y < 16; ++y) {
    for (int x = 8; x < 16; ++x) img(x, y) = 220;
  }
  return img;
}

}  // namespace

TEST(EdgeStrength, ConstantImageIsZero) {
  const RealField e = edge_strength(GrayImage(12, 12, 140), AugmentConfig{});
  for (double v : e.values()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(e.normalized());
}

TEST(EdgeStrength, WithinUnitInterval) {
  const RealField e = edge_strength(fold_image(), AugmentConfig{});
  for (double v : e.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(EdgeStrength, StepEdgeIsMeanOfComponents) {
  const AugmentConfig cfg;
  const GrayImage eq = imgcore::histogram_equalize(step_image());
  const RealField g = imgcore::normalize01(imgcore::gradient_magnitude(eq, cfg.gradient_sigma));
  const RealField h = imgcore::normalize01(
      imgcore::butterworth_highpass(eq, cfg.highpass_cutoff, cfg.highpass_order));
  const RealField e = edge_strength(step_image(), cfg);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_EQ(e.values()[i], (g.values()[i] + h.values()[i]) / 2.0);
  }
}

TEST(FoldProbability, ClosedFormValues) {
  const AugmentConfig cfg;  // gamma 4, theta 0.55
  EXPECT_EQ(fold_probability(0.55, cfg), 0.5);
  EXPECT_NEAR(fold_probability(0.8, cfg), 0.7310585786300049, 1e-12);
  EXPECT_NEAR(fold_probability(0.3, cfg), 0.2689414213699951, 1e-12);
  EXPECT_NEAR(fold_probability(0.3, cfg) + fold_probability(0.8, cfg), 1.0, 1e-12);
}

TEST(FoldProbability, DomainChecked) {
  EXPECT_THROW(fold_probability(-0.01, AugmentConfig{}), DomainError);
  EXPECT_THROW(fold_probability(1.01, AugmentConfig{}), DomainError);
}

TEST(FoldProbability, StrictlyIncreasing) {
  const AugmentConfig cfg;
  double prev = fold_probability(0.0, cfg);
  for (int i = 1; i <= 1000; ++i) {
    const double p = fold_probability(i / 1000.0, cfg);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(FoldProbability, StepTableLookup) {
  AugmentConfig cfg;
  cfg.probability_mode = ProbabilityMode::step_table;
  cfg.step_table = {{0.5, 0.1}, {1.0, 0.7}};
  EXPECT_EQ(fold_probability(0.0, cfg), 0.1);
  EXPECT_EQ(fold_probability(0.5, cfg), 0.1);
  EXPECT_EQ(fold_probability(0.51, cfg), 0.7);
  EXPECT_EQ(fold_probability(1.0, cfg), 0.7);
}

TEST(AugmentConfig, ValidatesInvariants) {
  AugmentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gamma = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.alpha_max = 2.5;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.beta_min = -300;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.step_table = {{0.5, 0.1}, {0.4, 0.2}, {1.0, 0.3}};
  cfg.probability_mode = ProbabilityMode::step_table;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg.step_table = {{0.5, 0.1}, {0.9, 0.2}};
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(SampleFoldMask, ZeroAndOneFields) {
  const AugmentConfig cfg;
  const RealField zeros(20, 20, std::vector<double>(400, 0.0), true);
  const RealField ones(20, 20, std::vector<double>(400, 1.0), true);
  for (std::uint64_t s = 0; s < 5; ++s) {
    EXPECT_EQ(sample_fold_mask(zeros, RngSeed{s}, cfg).count(), 0u);
    EXPECT_EQ(sample_fold_mask(ones, RngSeed{s}, cfg).count(), 400u);
  }
}

TEST(SampleFoldMask, RequiresNormalizedField) {
  EXPECT_THROW(sample_fold_mask(RealField(4, 4, 0.5), RngSeed{1}, AugmentConfig{}), DomainError);
}

TEST(SampleRawMask, HalfFieldConcentrates) {
  const RealField half(256, 256, std::vector<double>(256 * 256, 0.5), true);
  const double frac = static_cast<double>(sample_raw_mask(half, RngSeed{99}).count()) / (256.0 * 256.0);
  EXPECT_NEAR(frac, 0.5, 0.01);
}

TEST(SampleRawMask, CountMatchesExpectationOverSeeds) {
  RealField p(64, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) p(x, y) = (x + 2.0 * y) / (64.0 * 3.0);
  }
  p.mark_normalized();
  double mean = 0.0, var = 0.0;
  for (double v : p.values()) {
    mean += v;
    var += v * (1.0 - v);
  }
  double total = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) total += static_cast<double>(sample_raw_mask(p, RngSeed{s}).count());
  EXPECT_LE(std::abs(total - 100.0 * mean), 4.0 * std::sqrt(100.0 * var));
}

TEST(SampleRawMask, OrderIndependentKeying) {
  RealField p(10, 10, std::vector<double>(100, 0.5), true);
  const BinaryMask m = sample_raw_mask(p, RngSeed{4});
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      EXPECT_EQ(m(x, y), pixel_uniform(RngSeed{4}, static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)) < 0.5);
    }
  }
}

TEST(ComposeEnhanced, RegionalExamples) {
  const AugmentConfig cfg;
  const GrayImage eq(3, 3, 100);
  EXPECT_EQ(compose_enhanced(eq, BinaryMask(3, 3), 0.95, -10, cfg), eq);
  const GrayImage a = compose_enhanced(eq, BinaryMask(3, 3, true), 1.0, -5, cfg);
  for (auto v : a.pixels()) EXPECT_EQ(v, 95);
  const GrayImage low = compose_enhanced(GrayImage(1, 1, 2), BinaryMask(1, 1, true), 0.9, -15, cfg);
  EXPECT_EQ(low(0, 0), 0);
}

TEST(ComposeEnhanced, LiteralModeAppliesEverywhere) {
  AugmentConfig cfg;
  cfg.composition_mode = CompositionMode::literal;
  BinaryMask m(2, 1);
  m.set(0, 0, true);
  const GrayImage a = compose_enhanced(GrayImage(2, 1, 100), m, 1.0, -5, cfg);
  EXPECT_EQ(a(0, 0), 96);
  EXPECT_EQ(a(1, 0), 95);
}

TEST(ComposeEnhanced, RejectsMismatchAndRange) {
  const AugmentConfig cfg;
  EXPECT_THROW(compose_enhanced(GrayImage(3, 3), BinaryMask(2, 3), 0.95, -10, cfg), DimensionError);
  EXPECT_THROW(compose_enhanced(GrayImage(3, 3), BinaryMask(3, 3), 1.2, -10, cfg), DomainError);
  EXPECT_THROW(compose_enhanced(GrayImage(3, 3), BinaryMask(3, 3), 0.95, 0, cfg), DomainError);
}

TEST(ComposeEnhanced, DarkensMaskedRegion) {
  const AugmentConfig cfg;
  const GrayImage eq = imgcore::histogram_equalize(fold_image(1));
  const auto trace = augment_traced(fold_image(1), cfg, RngSeed{12});
  double before = 0.0, after = 0.0;
  for (int y = 0; y < eq.height(); ++y) {
    for (int x = 0; x < eq.width(); ++x) {
      if (!trace.mask(x, y)) continue;
      before += eq(x, y);
      after += trace.output(x, y);
    }
  }
  ASSERT_GT(trace.mask.count(), 0u);
  EXPECT_LE(after, before);
}

TEST(Augment, ConstantImageAlmostUnchanged) {
  const AugmentConfig cfg;
  const double p0 = fold_probability(0.0, cfg);
  // A pixel can only survive opening inside a fully set radius-1 cross of five pixels.
  EXPECT_LT(5.0 * std::pow(p0, 5), 1e-3);
  const GrayImage img(128, 128, 60);
  const GrayImage eq = imgcore::histogram_equalize(img);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const GrayImage out = augment(img, cfg, RngSeed{s});
    std::size_t diff = 0;
    for (std::size_t i = 0; i < out.size(); ++i) diff += out.pixels()[i] != eq.pixels()[i];
    EXPECT_LT(static_cast<double>(diff) / static_cast<double>(out.size()), 1e-3);
  }
}

TEST(Augment, DeterministicAndStochastic) {
  const AugmentConfig cfg;
  const GrayImage img = fold_image(2);
  EXPECT_EQ(augment(img, cfg, RngSeed{5}), augment(img, cfg, RngSeed{5}));
  const auto a = augment_traced(img, cfg, RngSeed{5});
  const auto b = augment_traced(img, cfg, RngSeed{6});
  EXPECT_GT(hamming_distance(a.mask, b.mask), 0u);
}

TEST(Augment, KeepsShapeAndRange) {
  const AugmentConfig cfg;
  for (int i = 0; i < 3; ++i) {
    const GrayImage img = fold_image(i);
    const auto t = augment_traced(img, cfg, RngSeed{static_cast<std::uint64_t>(i)});
    EXPECT_EQ(t.output.width(), img.width());
    EXPECT_EQ(t.output.height(), img.height());
    EXPECT_GE(t.alpha, cfg.alpha_min);
    EXPECT_LE(t.alpha, cfg.alpha_max);
    EXPECT_GE(t.beta, cfg.beta_min);
    EXPECT_LE(t.beta, cfg.beta_max);
  }
}

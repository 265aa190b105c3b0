#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "benchmark.hpp"
#include "foldaug/detector.hpp"
#include "foldaug/errors.hpp"
#include "foldaug/evalkit.hpp"

using namespace foldaug;
using namespace foldaug::detector;

namespace {

struct Small {
  std::vector<synthgen::GeneratedImage> images = synthgen::generate_images(bench::small_spec());
  std::vector<LabeledImage> dataset() const {
    std::vector<LabeledImage> d;
    for (const auto& g : images) d.push_back({&g.image, g.record.annotations});
    return d;
  }
};

const Small& small() {
  static const Small s;
  return s;
}

DetectorHyper quick_hyper() {
  DetectorHyper h;
  h.epochs = 1;
  h.iterations = 120;
  return h;
}

}  // namespace

TEST(DetectorTrain, LesionOnlyClassList) {
  const auto model = train(small().dataset(), {}, quick_hyper(), RngSeed{1});
  EXPECT_EQ(model->classes(), std::vector<ClassLabel>{ClassLabel::lesion});
}

TEST(DetectorTrain, TwoClassList) {
  auto d = small().dataset();
  d.back().annotations.push_back({{5, 5, 60, 60}, ClassLabel::hard_sample});
  const auto model = train(d, {}, quick_hyper(), RngSeed{1});
  EXPECT_EQ(model->classes(), (std::vector<ClassLabel>{ClassLabel::lesion, ClassLabel::hard_sample}));
}

TEST(DetectorTrain, NoLesionIsError) {
  auto d = small().dataset();
  for (auto& li : d) li.annotations.clear();
  EXPECT_THROW(train(d, {}, quick_hyper(), RngSeed{1}), TrainingError);
}

TEST(DetectorTrain, DegenerateBoxReportsIndex) {
  auto d = small().dataset();
  std::size_t before = 0;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) before += d[i].annotations.size();
  d.back().annotations.push_back({{30, 30, 30, 40}, ClassLabel::lesion});
  try {
    (void)train(d, {}, quick_hyper(), RngSeed{1});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.index(), before + d.back().annotations.size() - 1);
  }
}

TEST(DetectorTrain, DeterministicGivenSeed) {
  const auto a = train(small().dataset(), {}, quick_hyper(), RngSeed{3});
  const auto b = train(small().dataset(), {}, quick_hyper(), RngSeed{3});
  EXPECT_EQ(a->serialize(), b->serialize());
}

TEST(DetectorTrain, HookCalledPerImagePerEpoch) {
  DetectorHyper h = quick_hyper();
  h.epochs = 2;
  int calls = 0;
  const AugmentHook hook = [&](const GrayImage& img, RngSeed) {
    ++calls;
    return img;
  };
  (void)train(small().dataset(), hook, h, RngSeed{3});
  EXPECT_EQ(calls, static_cast<int>(2 * small().images.size()));
}

TEST(DetectorHyper, Validation) {
  DetectorHyper h;
  EXPECT_NO_THROW(h.validate());
  h.window_sizes.clear();
  EXPECT_THROW(h.validate(), DomainError);
  h = {};
  h.nms_iou = 0.0;
  EXPECT_THROW(h.validate(), DomainError);
  h = {};
  h.background_iou = h.positive_iou + 0.05;
  EXPECT_THROW(h.validate(), DomainError);
}

class TrainedSmall : public ::testing::Test {
protected:
  static void SetUpTestSuite() { model_ = train(small().dataset(), {}, quick_hyper(), RngSeed{2}); }
  static inline std::shared_ptr<const SlidingWindowModel> model_;
};

TEST_F(TrainedSmall, ThresholdSemantics) {
  const GrayImage& img = small().images.front().image;
  EXPECT_THROW((void)model_->infer(img, 1.0 + 1e-9), DomainError);
  EXPECT_THROW((void)model_->infer(img, -0.1), DomainError);
  for (const auto& d : model_->infer(img, 1.0)) EXPECT_EQ(d.confidence, 1.0);
}

TEST_F(TrainedSmall, OutputContract) {
  for (const auto& g : small().images) {
    const auto dets = model_->infer(g.image, 0.1);
    EXPECT_TRUE(std::is_sorted(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
      return a.confidence > b.confidence;
    }));
    for (const auto& d : dets) {
      EXPECT_GE(d.confidence, 0.1);
      EXPECT_LE(d.confidence, 1.0);
      EXPECT_TRUE(d.box.within(g.image.width(), g.image.height()));
    }
    EXPECT_EQ(nms(dets, model_->hyper().nms_iou), dets);
    EXPECT_EQ(model_->infer(g.image, 0.1), dets);
  }
}

TEST_F(TrainedSmall, TooSmallImageIsInferenceError) {
  EXPECT_THROW((void)model_->infer(GrayImage(20, 20), 0.5), InferenceError);
}

TEST_F(TrainedSmall, SerializationRoundTrip) {
  const auto bytes = model_->serialize();
  const auto back = SlidingWindowModel::deserialize(bytes);
  EXPECT_EQ(back->serialize(), bytes);
  EXPECT_EQ(back->classes(), model_->classes());
  EXPECT_EQ(back->hyper(), model_->hyper());
  synthgen::CorpusSpec spec = bench::small_spec();
  spec.seed = 555;
  spec.patients = 5;
  const auto fresh = synthgen::generate_images(spec);
  ASSERT_GE(fresh.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(back->infer(fresh[i].image, 0.0), model_->infer(fresh[i].image, 0.0));
  }
}

TEST_F(TrainedSmall, CheckpointFile) {
  const auto path = std::filesystem::temp_directory_path() / "foldaug_test_model.fdet";
  save_checkpoint(path, *model_);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back->serialize(), model_->serialize());
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST_F(TrainedSmall, CorruptCheckpointsRejected) {
  auto bytes = model_->serialize();
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(SlidingWindowModel::deserialize(bad_magic), ParseError);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_THROW(SlidingWindowModel::deserialize(truncated), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(SlidingWindowModel::deserialize(trailing), ParseError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(SlidingWindowModel::deserialize(version), ParseError);
}

// Frozen reference model: the first 20 lesion images of the benchmark training split.
class RegressionModel : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    const auto& pos = bench::splits().positives;
    train_ = std::vector<LabeledImage>(pos.begin(), pos.begin() + 20);
    model_ = train(train_, {}, DetectorHyper{}, bench::kTrainSeed);
  }
  static inline std::vector<LabeledImage> train_;
  static inline std::shared_ptr<const SlidingWindowModel> model_;
};

TEST_F(RegressionModel, TrainingRecallAtXi03) {
  evalkit::EvalSettings s;
  s.xi = 0.3;
  const auto ev = evalkit::evaluate(*model_, train_, s);
  EXPECT_GE(ev.report.recall, 0.8);
}

TEST_F(RegressionModel, BlankBackgroundHasNoLesionDetections) {
  const auto spec = bench::blank_spec();
  for (int i = 0; i < 10; ++i) {
    const auto g = synthgen::render_image(spec, i, false);
    EXPECT_TRUE(evalkit::lesion_detections_at(model_->infer(g.image, 0.5), 0.5).empty()) << i;
  }
}

TEST_F(RegressionModel, TopDetectionLocalizesSingleLesions) {
  int single = 0;
  int localized = 0;
  for (const auto& item : bench::splits().held_out) {
    if (item.annotations.size() != 1) continue;
    ++single;
    const auto dets = evalkit::lesion_detections_at(model_->infer(*item.image, 0.0), 0.0);
    if (!dets.empty() && iou(dets.front().box, item.annotations.front().box) >= 0.5) ++localized;
  }
  ASSERT_GT(single, 0);
  EXPECT_GE(3 * localized, 2 * single) << localized << " of " << single;
}

#include "foldaug/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "foldaug/errors.hpp"
#include "foldaug/imgcore.hpp"
#include "window_features.hpp"

namespace foldaug::detector {
namespace detail {
namespace {

// Channel layout of FeatureMaps.
constexpr int kIntensity = 0;
constexpr int kIntensitySq = 1;
constexpr int kEdgeBin0 = 2;
constexpr int kEdgeBins = 8;
constexpr int kOrientBin0 = kEdgeBin0 + kEdgeBins;
constexpr int kOrientBins = 4;
constexpr int kMagnitude = kOrientBin0 + kOrientBins;
constexpr int kChannels = kMagnitude + 1;

// Upper bounds of the first seven edge-strength bins; the eighth is open-ended.
constexpr std::array<double, kEdgeBins - 1> kEdgeBounds{16, 32, 64, 128, 192, 256, 384};

constexpr std::size_t kCellFeatures = 2 + kEdgeBins + kOrientBins + 1;
constexpr std::size_t kFeatureCount = 2 * kCellFeatures + 7;

int edge_bin(double m) {
  int b = 0;
  while (b < kEdgeBins - 1 && m >= kEdgeBounds[static_cast<std::size_t>(b)]) ++b;
  return b;
}

struct CellStats {
  double area;
  std::array<double, kChannels> sums;
};

CellStats cell_sums(const FeatureMaps& m, int x0, int y0, int x1, int y1) {
  CellStats c{};
  c.area = static_cast<double>(x1 - x0) * (y1 - y0);
  for (int ch = 0; ch < kChannels; ++ch) c.sums[static_cast<std::size_t>(ch)] = m.sum(ch, x0, y0, x1, y1);
  return c;
}

void cell_features(const CellStats& c, double* out) {
  const double mean = c.sums[kIntensity] / c.area;
  const double var = std::max(0.0, c.sums[kIntensitySq] / c.area - mean * mean);
  out[0] = mean;
  out[1] = std::sqrt(var);
  for (int b = 0; b < kEdgeBins; ++b) out[2 + b] = c.sums[static_cast<std::size_t>(kEdgeBin0 + b)] / c.area;
  const double total = c.sums[kMagnitude] + 1e-9;
  for (int b = 0; b < kOrientBins; ++b) {
    out[2 + kEdgeBins + b] = c.sums[static_cast<std::size_t>(kOrientBin0 + b)] / total;
  }
  out[2 + kEdgeBins + kOrientBins] = c.sums[kMagnitude] / c.area;
}

}  // namespace

FeatureMaps::FeatureMaps(const GrayImage& equalized)
    : width_(equalized.width()),
      height_(equalized.height()),
      plane_(static_cast<std::size_t>(width_ + 1) * static_cast<std::size_t>(height_ + 1)),
      integral_(plane_ * kChannels, 0.0) {
  const imgcore::Gradients g = imgcore::sobel_gradients(equalized);
  const std::size_t stride = static_cast<std::size_t>(width_ + 1);
  std::array<double, kChannels> px{};
  for (int y = 0; y < height_; ++y) {
    std::array<double, kChannels> row{};
    for (int x = 0; x < width_; ++x) {
      px.fill(0.0);
      const double v = equalized(x, y) / 255.0;
      const double gx = g.gx(x, y);
      const double gy = g.gy(x, y);
      const double mag = std::sqrt(gx * gx + gy * gy);
      double angle = std::atan2(gy, gx);
      if (angle < 0.0) angle += std::numbers::pi;
      const int ob = std::min(kOrientBins - 1, static_cast<int>(angle / (std::numbers::pi / kOrientBins)));
      px[kIntensity] = v;
      px[kIntensitySq] = v * v;
      px[static_cast<std::size_t>(kEdgeBin0 + edge_bin(mag))] = 1.0;
      px[static_cast<std::size_t>(kOrientBin0 + ob)] = mag / 256.0;
      px[kMagnitude] = mag / 256.0;
      for (int ch = 0; ch < kChannels; ++ch) {
        const auto c = static_cast<std::size_t>(ch);
        row[c] += px[c];
        double* t = integral_.data() + c * plane_;
        t[(y + 1) * stride + (x + 1)] = t[y * stride + (x + 1)] + row[c];
      }
    }
  }
}

void FeatureMaps::window_features(const BoundingBox& w, std::span<double> out) const {
  const int s = w.width();
  const int q = s / 4;
  const CellStats whole = cell_sums(*this, w.x_min, w.y_min, w.x_max, w.y_max);
  const CellStats inner = cell_sums(*this, w.x_min + q, w.y_min + q, w.x_max - q, w.y_max - q);
  CellStats ring{};
  ring.area = whole.area - inner.area;
  for (std::size_t ch = 0; ch < kChannels; ++ch) ring.sums[ch] = whole.sums[ch] - inner.sums[ch];

  double* o = out.data();
  cell_features(inner, o);
  cell_features(ring, o + kCellFeatures);
  o[2 * kCellFeatures + 0] = o[0] - o[kCellFeatures + 0];
  o[2 * kCellFeatures + 1] = o[1] - o[kCellFeatures + 1];
  o[2 * kCellFeatures + 2] = o[kCellFeatures - 1] - o[2 * kCellFeatures - 1];

  // Half-window imbalance: large when the window sits off-centre on a structure.
  const int h = s / 2;
  const double half_area = static_cast<double>(h) * s;
  auto half_gap = [&](int ch, bool vertical) {
    const double a = vertical ? sum(ch, w.x_min, w.y_min, w.x_max, w.y_min + h)
                              : sum(ch, w.x_min, w.y_min, w.x_min + h, w.y_max);
    const double b = vertical ? sum(ch, w.x_min, w.y_max - h, w.x_max, w.y_max)
                              : sum(ch, w.x_max - h, w.y_min, w.x_max, w.y_max);
    return std::abs(a - b) / half_area;
  };
  o[2 * kCellFeatures + 3] = half_gap(kIntensity, false);
  o[2 * kCellFeatures + 4] = half_gap(kIntensity, true);
  o[2 * kCellFeatures + 5] = half_gap(kMagnitude, false);
  o[2 * kCellFeatures + 6] = half_gap(kMagnitude, true);
}

std::vector<BoundingBox> enumerate_windows(int width, int height, const DetectorHyper& hyper) {
  std::vector<BoundingBox> out;
  for (int s : hyper.window_sizes) {
    if (s > width || s > height) continue;
    const int stride = std::max(1, static_cast<int>(std::lround(s * hyper.stride_fraction)));
    auto positions = [&](int extent) {
      std::vector<int> p;
      for (int v = 0; v + s <= extent; v += stride) p.push_back(v);
      if (p.back() != extent - s) p.push_back(extent - s);
      return p;
    };
    const auto xs = positions(width);
    const auto ys = positions(height);
    for (int y : ys) {
      for (int x : xs) out.push_back(BoundingBox{x, y, x + s, y + s});
    }
  }
  return out;
}

}  // namespace detail

namespace {

using detail::FeatureMaps;

constexpr std::uint64_t kViewStream = 0x7e11;
constexpr std::uint64_t kBackgroundStream = 0xb6;

// Per-view window data kept for background bootstrapping.
struct ViewPool {
  std::vector<float> features;  // background candidates, row-major
  std::vector<bool> used;
};

struct SampleSet {
  std::size_t dim;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  void add(std::span<const double> f, int cls) {
    x.insert(x.end(), f.begin(), f.end());
    y.push_back(cls);
  }
};

std::vector<double> softmax_row(std::span<const double> w, std::size_t rows, std::size_t dim,
                                const double* x) {
  std::vector<double> z(rows);
  for (std::size_t k = 0; k < rows; ++k) {
    const double* wk = w.data() + k * (dim + 1);
    double acc = wk[dim];
    for (std::size_t j = 0; j < dim; ++j) acc += wk[j] * x[j];
    z[k] = acc;
  }
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

// Full-batch gradient descent with momentum on class-weighted softmax cross-entropy.
void fit_softmax(const SampleSet& s, std::size_t rows, const DetectorHyper& hyper,
                 std::vector<double>& w) {
  const std::size_t dim = s.dim;
  const std::size_t cols = dim + 1;
  std::vector<std::size_t> counts(rows, 0);
  for (int c : s.y) ++counts[static_cast<std::size_t>(c)];
  std::vector<double> class_total(rows, hyper.object_class_weight);
  class_total[0] = 1.0;
  double norm = 0.0;
  for (std::size_t k = 0; k < rows; ++k) {
    if (counts[k] > 0) norm += class_total[k];
  }
  std::vector<double> sample_w(rows, 0.0);
  for (std::size_t k = 0; k < rows; ++k) {
    if (counts[k] > 0) sample_w[k] = class_total[k] / norm / static_cast<double>(counts[k]);
  }

  std::vector<double> grad(rows * cols);
  std::vector<double> velocity(rows * cols, 0.0);
  constexpr double kMomentum = 0.9;
  for (int it = 0; it < hyper.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double* xi = s.x.data() + i * dim;
      const auto p = softmax_row(w, rows, dim, xi);
      const auto yi = static_cast<std::size_t>(s.y[i]);
      const double wi = sample_w[yi];
      for (std::size_t k = 0; k < rows; ++k) {
        const double e = wi * (p[k] - (k == yi ? 1.0 : 0.0));
        double* gk = grad.data() + k * cols;
        for (std::size_t j = 0; j < dim; ++j) gk[j] += e * xi[j];
        gk[dim] += e;
      }
    }
    for (std::size_t k = 0; k < rows; ++k) {
      for (std::size_t j = 0; j < dim; ++j) grad[k * cols + j] += hyper.l2 * w[k * cols + j];
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      velocity[i] = kMomentum * velocity[i] - hyper.learning_rate * grad[i];
      w[i] += velocity[i];
    }
  }
}

int class_row(const std::vector<ClassLabel>& classes, ClassLabel label) {
  const auto it = std::find(classes.begin(), classes.end(), label);
  return it == classes.end() ? -1 : static_cast<int>(it - classes.begin()) + 1;
}

}  // namespace

void DetectorHyper::validate() const {
  auto fail = [](const std::string& m) { throw DomainError("detector hyperparameters: " + m); };
  if (window_sizes.empty()) fail("at least one window size is required");
  for (int s : window_sizes) {
    if (s < 8) fail("window sizes must be >= 8");
  }
  if (!(stride_fraction > 0.0 && stride_fraction <= 1.0)) fail("stride fraction must lie in (0, 1]");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) fail("nms IoU must lie in (0, 1]");
  if (!(positive_iou > 0.0 && positive_iou <= 1.0)) fail("positive IoU must lie in (0, 1]");
  if (!(background_iou > 0.0 && background_iou <= positive_iou)) {
    fail("background IoU must lie in (0, positive IoU]");
  }
  if (epochs < 1 || iterations < 1) fail("epochs and iterations must be >= 1");
  if (background_per_image < 1) fail("background samples per image must be >= 1");
  if (partial_per_image < 0) fail("partial-overlap samples per image must be >= 0");
  if (bootstrap_rounds < 0 || bootstrap_per_image < 0) fail("bootstrap settings must be >= 0");
  if (!(learning_rate > 0.0) || l2 < 0.0) fail("bad optimizer settings");
  if (!(object_class_weight > 0.0)) fail("object class weight must be positive");
  if (!(score_floor >= 0.0 && score_floor <= 1.0)) fail("score floor must lie in [0, 1]");
}

std::size_t feature_dimension() { return detail::kFeatureCount; }

std::vector<Detection> nms(std::vector<Detection> detections, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw DomainError("NMS IoU threshold must lie in (0, 1]");
  }
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.label == d.label && iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

SlidingWindowModel::SlidingWindowModel(DetectorHyper hyper, std::vector<ClassLabel> classes,
                                       std::vector<double> feature_mean,
                                       std::vector<double> feature_scale,
                                       std::vector<double> weights)
    : hyper_(std::move(hyper)),
      classes_(std::move(classes)),
      mean_(std::move(feature_mean)),
      scale_(std::move(feature_scale)),
      weights_(std::move(weights)) {
  hyper_.validate();
  if (classes_.empty()) throw DomainError("model class list is empty");
  const std::size_t dim = feature_dimension();
  if (mean_.size() != dim || scale_.size() != dim ||
      weights_.size() != (classes_.size() + 1) * (dim + 1)) {
    throw DomainError("model parameter sizes do not match the feature layout");
  }
}

std::vector<double> SlidingWindowModel::window_scores(std::span<const double> features) const {
  const std::size_t dim = feature_dimension();
  std::vector<double> z(dim);
  for (std::size_t j = 0; j < dim; ++j) z[j] = (features[j] - mean_[j]) * scale_[j];
  return softmax_row(weights_, classes_.size() + 1, dim, z.data());
}

std::vector<Detection> SlidingWindowModel::infer(const GrayImage& img, double min_confidence) const {
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
    throw DomainError("min_confidence must lie in [0, 1]");
  }
  const int smallest = *std::min_element(hyper_.window_sizes.begin(), hyper_.window_sizes.end());
  if (img.width() < smallest || img.height() < smallest) {
    throw InferenceError("image " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()) + " is smaller than the smallest window (" +
                         std::to_string(smallest) + ")");
  }
  const double floor = std::max(min_confidence, hyper_.score_floor);
  const FeatureMaps maps(imgcore::histogram_equalize(img));
  const auto windows = detail::enumerate_windows(img.width(), img.height(), hyper_);

  std::vector<Detection> dets;
  std::vector<double> f(feature_dimension());
  for (const auto& w : windows) {
    maps.window_features(w, f);
    const auto p = window_scores(f);
    for (std::size_t k = 0; k < classes_.size(); ++k) {
      if (p[k + 1] >= floor) dets.push_back(Detection{w, classes_[k], p[k + 1]});
    }
  }
  return nms(std::move(dets), hyper_.nms_iou);
}

SlidingWindowTrainer::SlidingWindowTrainer(DetectorHyper hyper) : hyper_(std::move(hyper)) {
  hyper_.validate();
}

std::shared_ptr<const Model> SlidingWindowTrainer::train(std::span<const LabeledImage> dataset,
                                                         const AugmentHook& augment,
                                                         RngSeed seed) const {
  return detector::train(dataset, augment, hyper_, seed);
}

std::shared_ptr<const SlidingWindowModel> train(std::span<const LabeledImage> dataset,
                                                const AugmentHook& augment,
                                                const DetectorHyper& hyper, RngSeed seed) {
  hyper.validate();
  std::size_t ann_index = 0;
  bool any_lesion = false;
  bool any_hard = false;
  for (const auto& item : dataset) {
    if (item.image == nullptr || item.image->empty()) throw TrainingError("dataset image is empty");
    for (const auto& a : item.annotations) {
      if (!a.box.within(item.image->width(), item.image->height())) {
        throw TrainingError("annotation " + std::to_string(ann_index) +
                                " is degenerate or outside its image",
                            ann_index);
      }
      any_lesion |= a.label == ClassLabel::lesion;
      any_hard |= a.label == ClassLabel::hard_sample;
      ++ann_index;
    }
  }
  if (!any_lesion) throw TrainingError("dataset has no lesion annotation");

  std::vector<ClassLabel> classes{ClassLabel::lesion};
  if (any_hard) classes.push_back(ClassLabel::hard_sample);
  const std::size_t rows = classes.size() + 1;
  const std::size_t dim = feature_dimension();

  SampleSet samples{dim, {}, {}};
  std::vector<ViewPool> pools;
  std::vector<double> f(dim);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& item = dataset[i];
      const std::uint64_t view_tag = (static_cast<std::uint64_t>(epoch) << 32) | i;
      const GrayImage view =
          augment ? augment(*item.image, derive_seed(seed, kViewStream ^ mix64(view_tag)))
                  : *item.image;
      if (view.width() != item.image->width() || view.height() != item.image->height()) {
        throw TrainingError("augmentation hook changed image dimensions");
      }
      const FeatureMaps maps(imgcore::histogram_equalize(view));
      const auto windows = detail::enumerate_windows(view.width(), view.height(), hyper);

      std::vector<std::size_t> background;
      std::vector<std::size_t> partial;
      for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        double best_any = 0.0;
        double best_lesion = 0.0;
        int label_row = 0;
        double best_label_iou = 0.0;
        for (const auto& a : item.annotations) {
          const double o = iou(windows[wi], a.box);
          best_any = std::max(best_any, o);
          if (a.label == ClassLabel::lesion) best_lesion = std::max(best_lesion, o);
          const int row = class_row(classes, a.label);
          // Lesion beats hard-sample when a window qualifies for both.
          if (o >= hyper.positive_iou && (label_row == 0 || row < label_row ||
                                          (row == label_row && o > best_label_iou))) {
            label_row = row;
            best_label_iou = o;
          }
        }
        // A hard-sample window that also touches a lesion is ambiguous; it only serves as
        // background.
        if (label_row > 0 && classes[static_cast<std::size_t>(label_row - 1)] == ClassLabel::hard_sample &&
            best_lesion >= hyper.background_iou) {
          label_row = 0;
        }
        if (label_row > 0) {
          maps.window_features(windows[wi], f);
          samples.add(f, label_row);
        } else if (best_any < hyper.background_iou) {
          background.push_back(wi);
        } else {
          partial.push_back(wi);
        }
      }

      Rng rng(derive_seed(seed, kBackgroundStream ^ mix64(view_tag)));
      rng.shuffle(background.begin(), background.end());
      rng.shuffle(partial.begin(), partial.end());
      ViewPool pool;
      pool.used.assign(background.size() + partial.size(), false);
      pool.features.reserve(pool.used.size() * dim);
      for (std::size_t b = 0; b < pool.used.size(); ++b) {
        const bool is_partial = b >= background.size();
        const std::size_t k = is_partial ? b - background.size() : b;
        maps.window_features(windows[is_partial ? partial[k] : background[k]], f);
        const int quota = is_partial ? hyper.partial_per_image : hyper.background_per_image;
        if (static_cast<int>(k) < quota) {
          samples.add(f, 0);
          pool.used[b] = true;
        }
        if (hyper.bootstrap_rounds > 0) pool.features.insert(pool.features.end(), f.begin(), f.end());
      }
      pools.push_back(std::move(pool));
    }
  }

  std::vector<double> mean(dim, 0.0), scale(dim, 1.0);
  {
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) mean[j] += samples.x[i * dim + j];
    }
    for (double& m : mean) m /= n;
    std::vector<double> var(dim, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = samples.x[i * dim + j] - mean[j];
        var[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const double sd = std::sqrt(var[j] / n);
      scale[j] = sd > 1e-9 ? 1.0 / sd : 1.0;
    }
  }

  auto standardized = [&](const SampleSet& raw) {
    SampleSet z{dim, raw.x, raw.y};
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        z.x[i * dim + j] = (z.x[i * dim + j] - mean[j]) * scale[j];
      }
    }
    return z;
  };

  std::vector<double> weights(rows * (dim + 1), 0.0);
  fit_softmax(standardized(samples), rows, hyper, weights);

  for (int round = 0; round < hyper.bootstrap_rounds; ++round) {
    std::vector<double> z(dim);
    for (auto& pool : pools) {
      const std::size_t n = pool.used.size();
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t b = 0; b < n; ++b) {
        if (pool.used[b]) continue;
        const float* raw = pool.features.data() + b * dim;
        for (std::size_t j = 0; j < dim; ++j) z[j] = (raw[j] - mean[j]) * scale[j];
        const auto p = softmax_row(weights, rows, dim, z.data());
        scored.emplace_back(p[1], b);
      }
      const std::size_t take =
          std::min<std::size_t>(scored.size(), static_cast<std::size_t>(hyper.bootstrap_per_image));
      std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                        scored.end(), [](const auto& a, const auto& b) {
                          return a.first > b.first || (a.first == b.first && a.second < b.second);
                        });
      for (std::size_t t = 0; t < take; ++t) {
        const std::size_t b = scored[t].second;
        pool.used[b] = true;
        const float* raw = pool.features.data() + b * dim;
        std::vector<double> fv(raw, raw + dim);
        samples.add(fv, 0);
      }
    }
    fit_softmax(standardized(samples), rows, hyper, weights);
  }

  auto model = std::make_shared<SlidingWindowModel>(hyper, classes, std::move(mean),
                                                    std::move(scale), std::move(weights));
  model->set_metadata(0, seed.value);
  return model;
}

std::vector<Detection> infer(const Model& model, const GrayImage& img, double min_confidence) {
  return model.infer(img, min_confidence);
}

}  // namespace foldaug::detector

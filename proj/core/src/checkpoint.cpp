#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "foldaug/detector.hpp"
#include "foldaug/errors.hpp"

namespace foldaug::detector {
namespace {

constexpr char kMagic[4] = {'F', 'D', 'E', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint is truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Guards against absurd sizes in corrupt files before allocating.
std::uint32_t bounded(std::uint32_t n, std::uint32_t limit, const char* what) {
  if (n > limit) throw ParseError(std::string("checkpoint ") + what + " count is implausible");
  return n;
}

}  // namespace

std::vector<std::uint8_t> SlidingWindowModel::serialize() const {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kFormatVersion);

  w.u32(static_cast<std::uint32_t>(classes_.size()));
  for (ClassLabel c : classes_) w.u8(static_cast<std::uint8_t>(c));

  w.u32(static_cast<std::uint32_t>(hyper_.window_sizes.size()));
  for (int s : hyper_.window_sizes) w.i32(s);
  w.f64(hyper_.stride_fraction);
  w.f64(hyper_.nms_iou);
  w.f64(hyper_.positive_iou);
  w.f64(hyper_.background_iou);
  w.i32(hyper_.epochs);
  w.i32(hyper_.background_per_image);
  w.i32(hyper_.bootstrap_rounds);
  w.i32(hyper_.bootstrap_per_image);
  w.i32(hyper_.partial_per_image);
  w.i32(hyper_.iterations);
  w.f64(hyper_.learning_rate);
  w.f64(hyper_.l2);
  w.f64(hyper_.object_class_weight);
  w.f64(hyper_.score_floor);

  w.u32(round_);
  w.u64(seed_);

  w.u32(static_cast<std::uint32_t>(mean_.size()));
  for (double v : mean_) w.f64(v);
  for (double v : scale_) w.f64(v);
  w.u32(static_cast<std::uint32_t>(weights_.size()));
  for (double v : weights_) w.f64(v);
  return w.take();
}

std::shared_ptr<const SlidingWindowModel> SlidingWindowModel::deserialize(
    std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a detector checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }

  std::vector<ClassLabel> classes(bounded(r.u32(), 2, "class"));
  for (auto& c : classes) {
    const std::uint8_t v = r.u8();
    if (v > 1) throw ParseError("checkpoint holds an unknown class label");
    c = static_cast<ClassLabel>(v);
  }

  DetectorHyper h;
  h.window_sizes.resize(bounded(r.u32(), 64, "window size"));
  for (int& s : h.window_sizes) s = r.i32();
  h.stride_fraction = r.f64();
  h.nms_iou = r.f64();
  h.positive_iou = r.f64();
  h.background_iou = r.f64();
  h.epochs = r.i32();
  h.background_per_image = r.i32();
  h.bootstrap_rounds = r.i32();
  h.bootstrap_per_image = r.i32();
  h.partial_per_image = r.i32();
  h.iterations = r.i32();
  h.learning_rate = r.f64();
  h.l2 = r.f64();
  h.object_class_weight = r.f64();
  h.score_floor = r.f64();

  const std::uint32_t round = r.u32();
  const std::uint64_t seed = r.u64();

  const std::uint32_t dim = bounded(r.u32(), 4096, "feature");
  std::vector<double> mean(dim), scale(dim);
  for (double& v : mean) v = r.f64();
  for (double& v : scale) v = r.f64();
  std::vector<double> weights(bounded(r.u32(), 1u << 20, "weight"));
  for (double& v : weights) v = r.f64();
  if (!r.done()) throw ParseError("checkpoint has trailing bytes");

  try {
    auto model = std::make_shared<SlidingWindowModel>(std::move(h), std::move(classes),
                                                      std::move(mean), std::move(scale),
                                                      std::move(weights));
    model->set_metadata(round, seed);
    return model;
  } catch (const DomainError& e) {
    throw ParseError(std::string("checkpoint is inconsistent: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const auto bytes = model.serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::shared_ptr<const SlidingWindowModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return SlidingWindowModel::deserialize(bytes);
}

}  // namespace foldaug::detector

#include "foldaug/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "foldaug/errors.hpp"
#include "foldaug/image_io.hpp"

namespace foldaug::synthgen {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kLesionAssignStream = 0x1e510;
constexpr std::uint64_t kImageStream = 0x10000;
constexpr std::uint64_t kNoiseStream = 0x20000;

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::string patient_id(int p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%02d", p);
  return buf;
}

std::string image_name(int j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img%02d.png", j);
  return buf;
}

std::vector<bool> lesion_assignment(const CorpusSpec& spec) {
  const int total = spec.patients * spec.images_per_patient;
  const int with_lesion = static_cast<int>(std::lround(spec.lesion_fraction * total));
  std::vector<int> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(RngSeed{spec.seed}, kLesionAssignStream));
  rng.shuffle(order.begin(), order.end());
  std::vector<bool> has(static_cast<std::size_t>(total), false);
  for (int i = 0; i < with_lesion; ++i) has[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return has;
}

std::string split_for_patient(const CorpusSpec& spec, int p) {
  if (p >= spec.patients - spec.validation_patients) return "validation";
  if (p >= spec.patients - spec.validation_patients - spec.test_patients) return "test";
  return "train";
}

// Smooth value noise on a coarse lattice, values in [-1, 1].
class ValueNoise {
public:
  ValueNoise(Rng& rng, double cell) : cell_(cell), seed_(RngSeed{rng.next()}) {}

  double operator()(double x, double y) const {
    const double gx = x / cell_;
    const double gy = y / cell_;
    const double fx = std::floor(gx);
    const double fy = std::floor(gy);
    const double tx = smoothstep(gx - fx);
    const double ty = smoothstep(gy - fy);
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    const double a = lattice(ix, iy), b = lattice(ix + 1, iy);
    const double c = lattice(ix, iy + 1), d = lattice(ix + 1, iy + 1);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
  }

private:
  double lattice(std::int64_t x, std::int64_t y) const {
    return 2.0 * pixel_uniform(seed_, static_cast<std::uint32_t>(x + 4096),
                               static_cast<std::uint32_t>(y + 4096)) -
           1.0;
  }

  double cell_;
  RngSeed seed_;
};

struct Background {
  double orientation;
  double spacing;
  double amplitude;
  double base;
  double shade_x;
  double shade_y;
  double warp_amp;
  double warp_len;
  double warp_phase;
  double phase0;

  double phase(double x, double y) const {
    const double c = std::cos(orientation), s = std::sin(orientation);
    const double along = -x * s + y * c;
    return 2.0 * kPi * (x * c + y * s) / spacing +
           warp_amp * std::sin(2.0 * kPi * along / warp_len + warp_phase) + phase0;
  }
  double level(double x, double y) const { return base + shade_x * x + shade_y * y; }
  double fold(double x, double y, double phase_offset = 0.0, double contrast = 1.0) const {
    return amplitude * contrast * std::sin(phase(x, y) + phase_offset);
  }
  double value(double x, double y) const { return level(x, y) + fold(x, y); }
};

// A planted object: blend weight and target intensity inside a square region of interest.
struct Patch {
  double cx;
  double cy;
  double reach;  // half side of the region of interest
  std::function<double(double, double)> weight;
  std::function<double(double, double, double)> target;  // (x, y, current) -> value
};

// Blends the patch into the canvas and returns the tight box of pixels with weight > 0.
BoundingBox paint(std::vector<double>& canvas, int w, int h, const Patch& p, bool apply) {
  const int x0 = std::max(0, static_cast<int>(std::floor(p.cx - p.reach)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.cx + p.reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(p.cy - p.reach)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.cy + p.reach)));
  BoundingBox box{w, h, 0, 0};
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double wt = p.weight(x, y);
      if (wt <= 0.0) continue;
      box.x_min = std::min(box.x_min, x);
      box.y_min = std::min(box.y_min, y);
      box.x_max = std::max(box.x_max, x + 1);
      box.y_max = std::max(box.y_max, y + 1);
      if (apply) {
        double& v = canvas[static_cast<std::size_t>(y) * w + x];
        v = (1.0 - wt) * v + wt * p.target(x, y, v);
      }
    }
  }
  return box;
}

// Irregular disc: radius modulated by low-order harmonics.
std::function<double(double, double)> blob_weight(Rng& rng, double cx, double cy, double radius,
                                                  double core) {
  std::array<double, 3> amp{}, ph{};
  for (int k = 0; k < 3; ++k) {
    amp[k] = rng.uniform(-0.12, 0.12);
    ph[k] = rng.uniform(0.0, 2.0 * kPi);
  }
  return [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    const double theta = std::atan2(dy, dx);
    double r = radius;
    for (int k = 0; k < 3; ++k) r *= 1.0 + amp[k] * std::cos((k + 2) * theta + ph[k]);
    const double d = std::sqrt(dx * dx + dy * dy) / r;
    if (d >= 1.0) return 0.0;
    return smoothstep((1.0 - d) / (1.0 - core));
  };
}

// Rotated rectangle with soft edges.
std::function<double(double, double)> rect_weight(double cx, double cy, double half_len,
                                                  double half_wid, double angle, double soft) {
  const double c = std::cos(angle), s = std::sin(angle);
  return [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    const double u = std::abs(dx * c + dy * s);
    const double v = std::abs(-dx * s + dy * c);
    if (u >= half_len || v >= half_wid) return 0.0;
    return smoothstep((half_len - u) / soft) * smoothstep((half_wid - v) / soft);
  };
}

Patch make_lesion(Rng& rng, const Background& bg, const CorpusSpec& spec, double cx, double cy,
                  double radius) {
  const double contrast = rng.uniform(0.2, 0.45);
  const double offset = rng.uniform(12.0, 26.0);
  const double twist = rng.uniform(2.0, 4.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  (void)spec;
  Patch p;
  p.cx = cx;
  p.cy = cy;
  p.reach = radius * 1.45;
  p.weight = blob_weight(rng, cx, cy, radius, 0.55);
  p.target = [=, &bg](double x, double y, double) {
    const double d = std::hypot(x - cx, y - cy) / radius;
    return bg.level(x, y) + offset + bg.fold(x, y, twist * (1.0 - std::min(d, 1.0)), contrast);
  };
  return p;
}

Patch make_distractor(Rng& rng, const Background& bg, DistractorKind kind, double cx, double cy,
                      double size) {
  Patch p;
  p.cx = cx;
  p.cy = cy;
  switch (kind) {
    case DistractorKind::vertebral_ridge: {
      const double half_len = size * 0.5;
      const double half_wid = rng.uniform(5.0, 8.0);
      const double angle = rng.uniform(0.0, kPi);
      const double lift = rng.uniform(35.0, 55.0);
      p.reach = half_len + 2.0;
      p.weight = rect_weight(cx, cy, half_len, half_wid, angle, 4.0);
      p.target = [=](double, double, double cur) { return cur + lift; };
      break;
    }
    case DistractorKind::gathered_folds: {
      const double radius = size * 0.5;
      const int spokes = rng.uniform_int(5, 9);
      const double rot = rng.uniform(0.0, 2.0 * kPi);
      p.reach = radius * 1.45;
      p.weight = blob_weight(rng, cx, cy, radius, 0.55);
      p.target = [=, &bg](double x, double y, double) {
        return bg.level(x, y) + bg.amplitude * std::sin(spokes * std::atan2(y - cy, x - cx) + rot);
      };
      break;
    }
    case DistractorKind::duodenal_banding: {
      const double half = size * 0.5;
      const double spacing = rng.uniform(5.0, 7.0);
      const double dir = bg.orientation + kPi / 2.0;
      const double contrast = rng.uniform(0.7, 1.0);
      p.reach = half * 1.5;
      p.weight = rect_weight(cx, cy, half, half, bg.orientation, 8.0);
      p.target = [=, &bg](double x, double y, double) {
        const double t = (x * std::cos(dir) + y * std::sin(dir)) / spacing;
        return bg.level(x, y) + bg.amplitude * contrast * std::sin(2.0 * kPi * t);
      };
      break;
    }
    case DistractorKind::irregular_mucosa: {
      const double radius = size * 0.5;
      const double amp = rng.uniform(22.0, 34.0);
      auto noise = std::make_shared<ValueNoise>(rng, rng.uniform(3.0, 5.0));
      p.reach = radius * 1.45;
      p.weight = blob_weight(rng, cx, cy, radius, 0.4);
      p.target = [=, &bg](double x, double y, double) {
        return bg.level(x, y) + 0.4 * bg.fold(x, y) + amp * (*noise)(x, y);
      };
      break;
    }
    case DistractorKind::wall_change: {
      const double half = size * 0.5;
      const double split = rng.uniform(0.0, 2.0 * kPi);
      const double drop = rng.uniform(10.0, 20.0);
      p.reach = half * 1.5;
      p.weight = rect_weight(cx, cy, half, half, split, 8.0);
      p.target = [=, &bg](double x, double y, double cur) {
        const double side = (x - cx) * std::cos(split) + (y - cy) * std::sin(split);
        if (side < 0.0) return cur;
        return bg.level(x, y) - drop + bg.fold(x, y, bg.phase(x, y), 1.0);
      };
      break;
    }
  }
  return p;
}

DistractorKind pick_kind(Rng& rng, const std::array<double, kDistractorKindCount>& mix) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int k = 0; k < kDistractorKindCount; ++k) {
    acc += mix[static_cast<std::size_t>(k)];
    if (u < acc) return static_cast<DistractorKind>(k);
  }
  return static_cast<DistractorKind>(kDistractorKindCount - 1);
}

bool overlaps_any(const BoundingBox& b, const std::vector<BoundingBox>& placed, int margin) {
  for (const auto& q : placed) {
    if (b.x_min - margin < q.x_max && q.x_min < b.x_max + margin && b.y_min - margin < q.y_max &&
        q.y_min < b.y_max + margin) {
      return true;
    }
  }
  return false;
}

}  // namespace

void CorpusSpec::validate() const {
  auto fail = [](const std::string& m) { throw DomainError("corpus spec: " + m); };
  if (width < 64 || height < 64) fail("image size must be at least 64x64");
  if (patients < 0 || images_per_patient < 0) fail("counts must be non-negative");
  if (!(lesion_fraction >= 0.0 && lesion_fraction <= 1.0)) fail("lesion fraction must lie in [0, 1]");
  if (lesions_per_image < 0) fail("lesions per image must be non-negative");
  if (!(lesion_radius_min > 0.0 && lesion_radius_min <= lesion_radius_max)) fail("bad lesion radius range");
  if (!(fold_spacing_min > 0.0 && fold_spacing_min <= fold_spacing_max)) fail("bad fold spacing range");
  if (!(fold_amplitude_min >= 0.0 && fold_amplitude_min <= fold_amplitude_max)) fail("bad fold amplitude range");
  if (!(base_intensity_min <= base_intensity_max)) fail("bad base intensity range");
  if (distractors_min < 0 || distractors_min > distractors_max) fail("bad distractor count range");
  double sum = 0.0;
  for (double m : distractor_mix) {
    if (m < 0.0) fail("distractor mix entries must be non-negative");
    sum += m;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("distractor mix must sum to 1");
  if (noise_sigma < 0.0) fail("noise sigma must be non-negative");
  if (validation_patients < 0 || test_patients < 0 ||
      validation_patients + test_patients > patients) {
    fail("bad split patient counts");
  }
}

GeneratedImage render_image(const CorpusSpec& spec, int index, bool include_lesions) {
  spec.validate();
  const int total = spec.patients * spec.images_per_patient;
  if (index < 0 || index >= total) throw DomainError("image index out of range");
  const int w = spec.width;
  const int h = spec.height;
  const int patient = index / spec.images_per_patient;
  const bool has_lesion = lesion_assignment(spec)[static_cast<std::size_t>(index)];

  Rng rng(derive_seed(RngSeed{spec.seed}, kImageStream + static_cast<std::uint64_t>(index)));
  Background bg{};
  bg.orientation = rng.uniform(0.0, kPi);
  bg.spacing = rng.uniform(spec.fold_spacing_min, spec.fold_spacing_max);
  bg.amplitude = rng.uniform(spec.fold_amplitude_min, spec.fold_amplitude_max);
  bg.base = rng.uniform(spec.base_intensity_min, spec.base_intensity_max);
  bg.shade_x = rng.uniform(-0.03, 0.03);
  bg.shade_y = rng.uniform(-0.03, 0.03);
  bg.warp_amp = rng.uniform(0.5, 1.5);
  bg.warp_len = rng.uniform(150.0, 300.0);
  bg.warp_phase = rng.uniform(0.0, 2.0 * kPi);
  bg.phase0 = rng.uniform(0.0, 2.0 * kPi);

  std::vector<double> canvas(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) canvas[static_cast<std::size_t>(y) * w + x] = bg.value(x, y);
  }

  GeneratedImage out;
  out.record.patient = patient_id(patient);
  out.record.image = "corpus/" + out.record.patient + "/" +
                     image_name(index % spec.images_per_patient);
  out.record.split = split_for_patient(spec, patient);
  out.record.width = w;
  out.record.height = h;

  std::vector<BoundingBox> placed;
  constexpr int kMargin = 6;
  constexpr int kAttempts = 60;

  const int lesions = has_lesion ? spec.lesions_per_image : 0;
  for (int l = 0; l < lesions; ++l) {
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double radius = rng.uniform(spec.lesion_radius_min, spec.lesion_radius_max);
      const double reach = radius * 1.45;
      const double cx = rng.uniform(reach + 2.0, w - reach - 2.0);
      const double cy = rng.uniform(reach + 2.0, h - reach - 2.0);
      Patch p = make_lesion(rng, bg, spec, cx, cy, radius);
      const BoundingBox box = paint(canvas, w, h, p, false);
      if (!box.valid() || overlaps_any(box, placed, kMargin)) continue;
      paint(canvas, w, h, p, include_lesions);
      placed.push_back(box);
      out.record.annotations.push_back(Annotation{box, ClassLabel::lesion});
      break;
    }
  }

  const int distractors = rng.uniform_int(spec.distractors_min, spec.distractors_max);
  for (int d = 0; d < distractors; ++d) {
    const DistractorKind kind = pick_kind(rng, spec.distractor_mix);
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double size = rng.uniform(48.0, 80.0);
      const double reach = size * 0.75;
      const double cx = rng.uniform(reach + 2.0, w - reach - 2.0);
      const double cy = rng.uniform(reach + 2.0, h - reach - 2.0);
      Patch p = make_distractor(rng, bg, kind, cx, cy, size);
      const BoundingBox box = paint(canvas, w, h, p, false);
      if (!box.valid() || overlaps_any(box, placed, kMargin)) continue;
      paint(canvas, w, h, p, true);
      placed.push_back(box);
      out.record.distractors.push_back(DistractorTag{box, kind});
      break;
    }
  }

  Rng noise(derive_seed(RngSeed{spec.seed}, kNoiseStream + static_cast<std::uint64_t>(index)));
  out.image = GrayImage(w, h);
  auto px = out.image.pixels();
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    const double v = canvas[i] + spec.noise_sigma * noise.normal();
    px[i] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
  }
  return out;
}

std::vector<GeneratedImage> generate_images(const CorpusSpec& spec) {
  spec.validate();
  const int total = spec.patients * spec.images_per_patient;
  std::vector<GeneratedImage> images;
  images.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) images.push_back(render_image(spec, i));
  return images;
}

DatasetManifest generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  DatasetManifest manifest;
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "corpus", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "corpus").string() + ": " + ec.message());
  const int total = spec.patients * spec.images_per_patient;
  for (int i = 0; i < total; ++i) {
    GeneratedImage g = render_image(spec, i);
    const auto path = out_dir / g.record.image;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
    io::write_png(path, g.image);
    manifest.records.push_back(std::move(g.record));
  }
  save_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

CorpusSummary describe_corpus(const DatasetManifest& manifest) {
  CorpusSummary s;
  std::set<std::string> patients;
  for (const auto& r : manifest.records) {
    ++s.images;
    patients.insert(r.patient);
    auto& split = s.per_split[r.split];
    ++split.images;
    if (r.is_control()) {
      ++s.control_images;
      ++split.control_images;
    }
    s.distractors += r.distractors.size();
    for (const auto& a : r.annotations) {
      if (a.label == ClassLabel::lesion) {
        ++s.lesion_annotations;
        ++split.lesion_annotations;
      } else {
        ++s.hard_annotations;
        ++split.hard_annotations;
      }
      const int side = std::max(a.box.width(), a.box.height());
      const std::size_t bin = side < 32 ? 0 : side < 64 ? 1 : side < 128 ? 2 : side < 256 ? 3 : 4;
      ++s.box_size_histogram[bin];
    }
  }
  s.patients = patients.size();
  return s;
}

std::string format_summary(const CorpusSummary& s) {
  std::ostringstream out;
  out << "images: " << s.images << "\n"
      << "patients: " << s.patients << "\n"
      << "control_images: " << s.control_images << "\n"
      << "lesion_annotations: " << s.lesion_annotations << "\n"
      << "hard_annotations: " << s.hard_annotations << "\n"
      << "distractors: " << s.distractors << "\n"
      << "box_size_histogram: [0,32)=" << s.box_size_histogram[0]
      << " [32,64)=" << s.box_size_histogram[1] << " [64,128)=" << s.box_size_histogram[2]
      << " [128,256)=" << s.box_size_histogram[3] << " [256,inf)=" << s.box_size_histogram[4]
      << "\n";
  for (const auto& [name, sp] : s.per_split) {
    out << "split " << (name.empty() ? "(none)" : name) << ": images=" << sp.images
        << " controls=" << sp.control_images << " lesions=" << sp.lesion_annotations
        << " hard=" << sp.hard_annotations << "\n";
  }
  return out.str();
}

}  // namespace foldaug::synthgen

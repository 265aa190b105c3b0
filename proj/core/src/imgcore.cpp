#include "foldaug/imgcore.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numeric>
#include <vector>

#include "foldaug/errors.hpp"

namespace foldaug::imgcore {
namespace {

void require_nonempty(const GrayImage& img) {
  if (img.empty()) throw DimensionError("image has zero area");
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

// Separable convolution with edge replication.
RealField convolve_separable(const RealField& in, const std::vector<double>& kx,
                             const std::vector<double>& ky) {
  const int w = in.width();
  const int h = in.height();
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);
  RealField tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) {
        acc += kx[static_cast<std::size_t>(i + rx)] * in(clamp_index(x + i, w), y);
      }
      tmp(x, y) = acc;
    }
  }
  RealField out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -ry; j <= ry; ++j) {
        acc += ky[static_cast<std::size_t>(j + ry)] * tmp(x, clamp_index(y + j, h));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : ptr(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

struct FftwPlan {
  FftwPlan(int rows, int cols, fftw_complex* buf, int sign) {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(rows, cols, buf, buf, sign, FFTW_ESTIMATE);
  }
  ~FftwPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  fftw_plan plan;
};

double signed_frequency(int k, int n) {
  return (k <= n / 2 ? k : k - n) / static_cast<double>(n);
}

// Horizontal extent of the disc at each vertical offset.
std::vector<int> disc_half_widths(int radius) {
  std::vector<int> hw(static_cast<std::size_t>(2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy) {
    hw[static_cast<std::size_t>(dy + radius)] =
        static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy))));
  }
  return hw;
}

// Per-row prefix sums of the mask: row y occupies [(w+1)*y, (w+1)*(y+1)).
std::vector<int> row_prefix_sums(const BinaryMask& m) {
  const int w = m.width();
  std::vector<int> ps(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(m.height()));
  for (int y = 0; y < m.height(); ++y) {
    int* row = ps.data() + static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(y);
    row[0] = 0;
    for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (m(x, y) ? 1 : 0);
  }
  return ps;
}

}  // namespace

GrayImage histogram_equalize(const GrayImage& img) {
  require_nonempty(img);
  std::array<std::size_t, 256> hist{};
  for (std::uint8_t v : img.pixels()) ++hist[v];

  std::array<std::size_t, 256> cdf{};
  std::partial_sum(hist.begin(), hist.end(), cdf.begin());
  const std::size_t n = img.size();
  const auto first = std::find_if(hist.begin(), hist.end(), [](std::size_t c) { return c > 0; });
  const std::size_t cdf_min = cdf[static_cast<std::size_t>(first - hist.begin())];

  std::array<std::uint8_t, 256> lut{};
  if (n == cdf_min) {
    lut.fill(255);
  } else {
    const double denom = static_cast<double>(n - cdf_min);
    for (std::size_t v = 0; v < 256; ++v) {
      const double num = cdf[v] >= cdf_min ? static_cast<double>(cdf[v] - cdf_min) : 0.0;
      lut[v] = static_cast<std::uint8_t>(std::lround(255.0 * num / denom));
    }
  }

  GrayImage out(img.width(), img.height());
  std::transform(img.pixels().begin(), img.pixels().end(), out.pixels().begin(),
                 [&](std::uint8_t v) { return lut[v]; });
  return out;
}

Gradients sobel_gradients(const GrayImage& img, double sigma) {
  if (img.width() < 3 || img.height() < 3) {
    throw DimensionError("gradient requires an image of at least 3x3 pixels");
  }
  if (!(sigma > 0.0)) throw DomainError("gradient sigma must be positive");

  RealField base(img.width(), img.height());
  std::transform(img.pixels().begin(), img.pixels().end(), base.values().begin(),
                 [](std::uint8_t v) { return static_cast<double>(v); });

  const auto g = gaussian_kernel(sigma);
  const RealField smooth = convolve_separable(base, g, g);

  // Sobel = derivative [-1 0 1] along one axis, smoothing [1 2 1] along the other.
  const std::vector<double> deriv{-1.0, 0.0, 1.0};
  const std::vector<double> tri{1.0, 2.0, 1.0};
  return Gradients{convolve_separable(smooth, deriv, tri), convolve_separable(smooth, tri, deriv)};
}

RealField gradient_magnitude(const GrayImage& img, double sigma) {
  const Gradients g = sobel_gradients(img, sigma);
  RealField out(img.width(), img.height());
  const auto gx = g.gx.values();
  const auto gy = g.gy.values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return out;
}

RealField butterworth_highpass(const GrayImage& img, double cutoff, int order) {
  require_nonempty(img);
  if (!(cutoff > 0.0 && cutoff <= 0.5)) throw DomainError("high-pass cutoff must lie in (0, 0.5]");
  if (order < 1) throw DomainError("high-pass order must be a positive integer");

  const int w = img.width();
  const int h = img.height();
  const int pw = next_pow2(w);
  const int ph = next_pow2(h);
  const std::size_t n = static_cast<std::size_t>(pw) * static_cast<std::size_t>(ph);

  double mean = 0.0;
  for (std::uint8_t v : img.pixels()) mean += v;
  mean /= static_cast<double>(img.size());

  FftwBuffer buf(n);
  for (std::size_t i = 0; i < n; ++i) buf.ptr[i][0] = buf.ptr[i][1] = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      buf.ptr[static_cast<std::size_t>(y) * pw + x][0] = img(x, y) - mean;
    }
  }

  FftwPlan forward(ph, pw, buf.ptr, FFTW_FORWARD);
  FftwPlan inverse(ph, pw, buf.ptr, FFTW_BACKWARD);
  fftw_execute_dft(forward.plan, buf.ptr, buf.ptr);

  for (int v = 0; v < ph; ++v) {
    const double fv = signed_frequency(v, ph);
    for (int u = 0; u < pw; ++u) {
      const double fu = signed_frequency(u, pw);
      const double d = std::sqrt(fu * fu + fv * fv);
      const double gain = d == 0.0 ? 0.0 : 1.0 / (1.0 + std::pow(cutoff / d, 2.0 * order));
      auto& c = buf.ptr[static_cast<std::size_t>(v) * pw + u];
      c[0] *= gain;
      c[1] *= gain;
    }
  }
  fftw_execute_dft(inverse.plan, buf.ptr, buf.ptr);

  RealField out(w, h);
  const double scale = 1.0 / static_cast<double>(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = std::abs(buf.ptr[static_cast<std::size_t>(y) * pw + x][0] * scale);
    }
  }
  return out;
}

RealField normalize01(const RealField& field) {
  if (field.empty()) throw DimensionError("cannot normalize an empty field");
  const auto [lo_it, hi_it] = std::minmax_element(field.values().begin(), field.values().end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> out(field.size(), 0.0);
  if (range > 0.0) {
    std::transform(field.values().begin(), field.values().end(), out.begin(),
                   [&](double v) { return (v - lo) / range; });
  }
  return RealField(field.width(), field.height(), std::move(out), true);
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  if (radius < 1) throw DomainError("structuring element radius must be >= 1");
  const int w = mask.width();
  const int h = mask.height();
  const auto hw = disc_half_widths(radius);
  const auto ps = row_prefix_sums(mask);
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int half = hw[static_cast<std::size_t>(dy + radius)];
        const int x0 = std::max(0, x - half);
        const int x1 = std::min(w - 1, x + half);
        const int* row = ps.data() + static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(yy);
        keep = (row[x1 + 1] - row[x0]) == (x1 - x0 + 1);
      }
      out.set(x, y, keep);
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 1) throw DomainError("structuring element radius must be >= 1");
  const int w = mask.width();
  const int h = mask.height();
  const auto hw = disc_half_widths(radius);
  const auto ps = row_prefix_sums(mask);
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dy = -radius; dy <= radius && !hit; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int half = hw[static_cast<std::size_t>(dy + radius)];
        const int x0 = std::max(0, x - half);
        const int x1 = std::min(w - 1, x + half);
        const int* row = ps.data() + static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(yy);
        hit = (row[x1 + 1] - row[x0]) > 0;
      }
      out.set(x, y, hit);
    }
  }
  return out;
}

BinaryMask morphological_open(const BinaryMask& mask, int radius) {
  return dilate(erode(mask, radius), radius);
}

}  // namespace foldaug::imgcore

#pragma once

// Slow, obviously-correct reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "foldaug/boxes.hpp"
#include "foldaug/image.hpp"
#include "foldaug/random.hpp"

namespace oracle {

using foldaug::Annotation;
using foldaug::BinaryMask;
using foldaug::BoundingBox;
using foldaug::ClassLabel;
using foldaug::Detection;

/// IoU by counting covered pixels on the integer grid.
inline double pixel_iou(const BoundingBox& a, const BoundingBox& b) {
  const int x0 = std::min(a.x_min, b.x_min), x1 = std::max(a.x_max, b.x_max);
  const int y0 = std::min(a.y_min, b.y_min), y1 = std::max(a.y_max, b.y_max);
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= a.x_min && x < a.x_max && y >= a.y_min && y < a.y_max;
      const bool in_b = x >= b.x_min && x < b.x_max && y >= b.y_min && y < b.y_max;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Rank order: higher confidence first, lower input index on ties.
inline std::vector<std::size_t> rank(const std::vector<Detection>& d) {
  std::vector<std::size_t> r(d.size());
  std::iota(r.begin(), r.end(), 0);
  std::stable_sort(r.begin(), r.end(),
                   [&](std::size_t a, std::size_t b) { return d[a].confidence > d[b].confidence; });
  return r;
}

/// Exhaustive-subset NMS: the kept set S is the unique subset in which a detection belongs to S
/// exactly when no higher-ranked member of S of its class overlaps it at >= thr.
inline std::vector<Detection> nms(const std::vector<Detection>& d, double thr) {
  const std::size_t n = d.size();
  const auto order = rank(d);
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[order[i]] = i;
  for (std::uint32_t subset = 0; subset < (1u << n); ++subset) {
    bool consistent = true;
    for (std::size_t i = 0; i < n && consistent; ++i) {
      bool suppressed = false;
      for (std::size_t j = 0; j < n; ++j) {
        if ((subset >> j & 1u) && pos[j] < pos[i] && d[j].label == d[i].label &&
            pixel_iou(d[j].box, d[i].box) >= thr) {
          suppressed = true;
        }
      }
      consistent = ((subset >> i & 1u) != 0) == !suppressed;
    }
    if (consistent) {
      std::vector<Detection> out;
      for (std::size_t k : order) {
        if (subset >> k & 1u) out.push_back(d[k]);
      }
      return out;
    }
  }
  return {};
}

struct Match {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detection, annotation)
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Replays the greedy rule one detection at a time, scanning every annotation explicitly.
inline Match match(const std::vector<Detection>& d, const std::vector<Annotation>& a, double thr) {
  Match m;
  std::vector<bool> used(a.size(), false);
  std::vector<bool> done(d.size(), false);
  for (;;) {
    // Pick the next detection: the lesion detection of highest confidence not yet processed.
    std::size_t next = d.size();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (done[i] || d[i].label != ClassLabel::lesion) continue;
      if (next == d.size() || d[i].confidence > d[next].confidence) next = i;
    }
    if (next == d.size()) break;
    done[next] = true;
    std::size_t pick = a.size();
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (used[j] || a[j].label != ClassLabel::lesion) continue;
      const double o = pixel_iou(d[next].box, a[j].box);
      if (o < thr) continue;
      if (pick == a.size() || o > pixel_iou(d[next].box, a[pick].box)) pick = j;
    }
    if (pick == a.size()) {
      ++m.fp;
    } else {
      used[pick] = true;
      m.pairs.emplace_back(next, pick);
    }
  }
  for (std::size_t j = 0; j < a.size(); ++j) m.fn += !used[j] && a[j].label == ClassLabel::lesion;
  return m;
}

struct XiPick {
  double xi = 0.0;
  bool reached = false;
  double recall = 0.0;
};

/// Tries every distinct confidence as a threshold, rematching from scratch each time.
inline XiPick select_xi(const std::vector<std::vector<Detection>>& dets,
                        const std::vector<std::vector<Annotation>>& anns, double target,
                        double thr) {
  std::vector<double> confs;
  for (const auto& v : dets) {
    for (const auto& d : v) {
      if (d.label == ClassLabel::lesion) confs.push_back(d.confidence);
    }
  }
  std::sort(confs.begin(), confs.end());
  confs.erase(std::unique(confs.begin(), confs.end()), confs.end());
  if (confs.empty()) return {0.0, false, 0.0};
  XiPick best{confs.front(), false, 0.0};
  for (double xi : confs) {
    std::size_t tp = 0, fn = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      std::vector<Detection> kept;
      for (const auto& d : dets[i]) {
        if (d.label == ClassLabel::lesion && d.confidence >= xi) kept.push_back(d);
      }
      const Match m = match(kept, anns[i], thr);
      tp += m.pairs.size();
      fn += m.fn;
    }
    const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    if (xi == confs.front()) best.recall = recall;
    if (tp + fn > 0 && recall >= target) best = {xi, true, recall};
  }
  return best;
}

/// Opening straight from the definition: erosion keeps a pixel when every in-bounds disc
/// neighbour is set; dilation sets a pixel when any in-bounds disc neighbour survived erosion.
inline BinaryMask open(const BinaryMask& m, int r) {
  const int w = m.width(), h = m.height();
  const auto in_disc = [r](int dx, int dy) { return dx * dx + dy * dy <= r * r; };
  BinaryMask eroded(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (!in_disc(dx, dy) || xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          all = all && m(xx, yy);
        }
      }
      eroded.set(x, y, all);
    }
  }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool any = false;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (!in_disc(dx, dy) || xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          any = any || eroded(xx, yy);
        }
      }
      out.set(x, y, any);
    }
  }
  return out;
}

/// Random valid box inside a w x h canvas.
inline BoundingBox random_box(foldaug::Rng& rng, int w, int h) {
  const int x0 = rng.uniform_int(0, w - 2), y0 = rng.uniform_int(0, h - 2);
  const int x1 = rng.uniform_int(x0 + 1, w), y1 = rng.uniform_int(y0 + 1, h);
  return {x0, y0, x1, y1};
}

/// Confidences drawn from a short list so ties occur.
inline double random_confidence(foldaug::Rng& rng) {
  static constexpr double levels[] = {0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.95};
  return levels[rng.below(8)];
}

}  // namespace oracle

// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "benchmark.hpp"
#include "foldaug/evalkit.hpp"
#include "foldaug/hbbt.hpp"
#include "foldaug/imgcore.hpp"
#include "foldaug/rsgaia.hpp"
#include "foldaug_cli/commands.hpp"
#include "foldaug_cli/workflow.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace foldaug;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------------------------
// 1

struct PublishedRow {
  const char* name;
  double precision, recall, f1;
};

constexpr PublishedRow kRows[] = {
    {"yolov3 reference", 26.5, 89.7, 40.9},
    {"model 1 baseline", 28.4, 90.1, 43.2},
    {"model 1 sGAIA", 33.8, 90.4, 49.2},
    {"model 1 proposed", 38.7, 90.1, 54.1},
    {"model 2 baseline", 36.4, 90.5, 51.9},
    {"model 2 sGAIA", 37.9, 90.1, 53.4},
    {"model 2 R-sGAIA", 39.2, 90.2, 54.6},
    {"model 2 HBBT", 39.4, 89.9, 54.8},
    {"model 2 proposed", 42.5, 90.2, 57.8},
};

Outcome f1_arithmetic() {
  double worst = 0.0;
  std::string worst_row;
  for (const auto& row : kRows) {
    // 10000 annotations; recall fixes TP, precision fixes the number of reported boxes.
    const auto tp = static_cast<std::size_t>(std::lround(row.recall * 100.0));
    const std::size_t fn = 10000 - tp;
    const auto reported = static_cast<std::size_t>(std::lround(tp * 100.0 / row.precision));
    const auto m = evalkit::metrics_from_counts(tp, reported - tp, fn, 0.5);
    const double err = std::abs(100.0 * m.f1 - row.f1);
    if (err > worst) {
      worst = err;
      worst_row = row.name;
    }
  }
  return {worst <= 0.1, fmt("%zu rows, max |dF1| = %.3f points (%s), tolerance 0.1",
                            std::size(kRows), worst, worst_row.c_str())};
}

// ---------------------------------------------------------------------------------------------
// 2

Outcome sigmoid_midpoint_symmetry() {
  Rng rng(RngSeed{2});
  double mid_err = 0.0, sym_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    rsgaia::AugmentConfig cfg;
    cfg.gamma = rng.uniform(0.1, 20.0);
    cfg.theta = rng.uniform(0.0, 1.0);
    const double d = rng.uniform(0.0, std::min(cfg.theta, 1.0 - cfg.theta));
    mid_err = std::max(mid_err, std::abs(rsgaia::fold_probability(cfg.theta, cfg) - 0.5));
    sym_err = std::max(sym_err, std::abs(rsgaia::fold_probability(cfg.theta + d, cfg) +
                                         rsgaia::fold_probability(cfg.theta - d, cfg) - 1.0));
  }
  return {mid_err <= 1e-12 && sym_err <= 1e-12,
          fmt("1000 draws, max |p(theta)-0.5| = %.2e, max |p(t+d)+p(t-d)-1| = %.2e", mid_err, sym_err)};
}

// ---------------------------------------------------------------------------------------------
// 3

Outcome edge_strength_composition() {
  synthgen::CorpusSpec spec;
  spec.seed = 33;
  const rsgaia::AugmentConfig cfg;
  std::size_t mismatches = 0, out_of_range = 0;
  for (int i = 0; i < 50; ++i) {
    const GrayImage img = synthgen::render_image(spec, i).image;
    const RealField e = rsgaia::edge_strength(img, cfg);
    const GrayImage eq = imgcore::histogram_equalize(img);
    const RealField g = imgcore::normalize01(imgcore::gradient_magnitude(eq, cfg.gradient_sigma));
    const RealField h = imgcore::normalize01(
        imgcore::butterworth_highpass(eq, cfg.highpass_cutoff, cfg.highpass_order));
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double v = e(x, y);
        out_of_range += !(v >= 0.0 && v <= 1.0);
        mismatches += v != (g(x, y) + h(x, y)) / 2.0;
      }
    }
  }
  return {mismatches == 0 && out_of_range == 0,
          fmt("50 images, %zu pixels outside [0,1], %zu pixels differing from the recomputed mean",
              out_of_range, mismatches)};
}

// ---------------------------------------------------------------------------------------------
// 4

Outcome sampling_law() {
  RealField p(256, 256, std::vector<double>(256 * 256, 0.5), true);
  int within = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const BinaryMask m = rsgaia::sample_raw_mask(p, RngSeed{s});
    std::size_t on = 0;
    for (int y = 0; y < 256; ++y) {
      for (int x = 0; x < 256; ++x) on += m(x, y);
    }
    const double dev = std::abs(static_cast<double>(on) / 65536.0 - 0.5);
    worst = std::max(worst, dev);
    within += dev <= 0.01;
  }
  return {within >= 99, fmt("%d/100 seeds within 0.01 of 0.5, max deviation %.4f", within, worst)};
}

// ---------------------------------------------------------------------------------------------
// 5

Outcome oracle_equivalence() {
  Rng rng(RngSeed{5});
  std::map<std::string, int> mismatches{{"iou", 0}, {"nms", 0}, {"match", 0}, {"select_xi", 0}, {"open", 0}};
  const int cases = 250;
  auto random_dets = [&](int n, int extent) {
    std::vector<Detection> d;
    for (int i = 0; i < n; ++i) {
      const auto label = rng.below(4) == 0 ? ClassLabel::hard_sample : ClassLabel::lesion;
      d.push_back({oracle::random_box(rng, extent, extent), label, oracle::random_confidence(rng)});
    }
    return d;
  };
  auto random_anns = [&](int n, int extent) {
    std::vector<Annotation> a;
    for (int i = 0; i < n; ++i) a.push_back({oracle::random_box(rng, extent, extent), ClassLabel::lesion});
    return a;
  };

  for (int c = 0; c < cases; ++c) {
    const auto a = oracle::random_box(rng, 16, 16), b = oracle::random_box(rng, 16, 16);
    mismatches["iou"] += std::abs(iou(a, b) - oracle::pixel_iou(a, b)) > 1e-12;

    const auto d = random_dets(static_cast<int>(rng.below(11)), 16);
    const double thr = rng.uniform(0.1, 0.9);
    mismatches["nms"] += detector::nms(d, thr) != oracle::nms(d, thr);

    const auto md = random_dets(static_cast<int>(rng.below(11)), 12);
    const auto ma = random_anns(static_cast<int>(rng.below(6)), 12);
    const auto got = evalkit::match_boxes(md, ma, 0.5);
    const auto want = oracle::match(md, ma, 0.5);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& p : got.pairs) pairs.emplace_back(p.detection, p.annotation);
    mismatches["match"] += pairs != want.pairs || got.false_positives.size() != want.fp ||
                           got.false_negatives.size() != want.fn;

    std::vector<std::vector<Detection>> sd(1 + rng.below(3));
    std::vector<std::vector<Annotation>> sa(sd.size());
    for (std::size_t i = 0; i < sd.size(); ++i) {
      sd[i] = random_dets(static_cast<int>(rng.below(6)), 8);
      sa[i] = random_anns(static_cast<int>(rng.below(4)), 8);
    }
    const double target = rng.uniform(0.05, 1.0);
    const auto sel = evalkit::select_xi(sd, sa, target, 0.5);
    const auto ref = oracle::select_xi(sd, sa, target, 0.5);
    mismatches["select_xi"] += sel.xi != ref.xi || sel.target_reached != ref.reached;

    const int w = 1 + static_cast<int>(rng.below(16)), h = 1 + static_cast<int>(rng.below(16));
    BinaryMask m(w, h);
    const double density = rng.uniform(0.2, 0.9);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) m.set(x, y, rng.uniform() < density);
    }
    const int r = 1 + static_cast<int>(rng.below(3));
    mismatches["open"] += imgcore::morphological_open(m, r) != oracle::open(m, r);
  }

  int total = 0;
  std::string parts;
  for (const auto& [name, n] : mismatches) {
    total += n;
    parts += fmt("%s%s %d", parts.empty() ? "" : ", ", name.c_str(), n);
  }
  return {total == 0, fmt("%d cases per operation, mismatches: %s", cases, parts.c_str())};
}

// ---------------------------------------------------------------------------------------------
// 6 and 7: the bundled benchmark

struct ModeRun {
  cli::TrainOutcome outcome;
  double seconds = 0.0;
};

std::map<cli::Mode, ModeRun>& mode_cache() {
  static std::map<cli::Mode, ModeRun> cache;
  return cache;
}

const ModeRun& run_mode(cli::Mode mode) {
  auto& cache = mode_cache();
  if (auto it = cache.find(mode); it != cache.end()) return it->second;
  const auto start = std::chrono::steady_clock::now();
  ModeRun r{cli::train_mode(bench::splits(), mode, config::RunSettings{}, bench::kTrainSeed), 0.0};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cache.emplace(mode, std::move(r)).first->second;
}

struct Counts {
  std::size_t tp, fp, fn;
};

bool same(const evalkit::MetricsReport& r, Counts c) { return r.tp == c.tp && r.fp == c.fp && r.fn == c.fn; }

// Frozen from the first verified run (default CorpusSpec, training seed 7).
constexpr Counts kHbbtRound0{15, 19, 0};
constexpr Counts kHbbtBest{14, 14, 1};
constexpr std::size_t kHbbtRound0ControlFp = 6;
constexpr std::size_t kHbbtBestControlFp = 0;

Outcome hbbt_efficacy(double& seconds) {
  const auto& run = run_mode(cli::Mode::hbbt);
  seconds = run.seconds;
  const auto& st = *run.outcome.state;
  const auto& r0 = st.log.front();
  const auto& best = st.log[static_cast<std::size_t>(st.best_round)];
  const bool improves = best.validation.f1 > r0.validation.f1;
  const bool fewer_fp = best.control_false_positives < r0.control_false_positives;
  const bool frozen = same(r0.validation, kHbbtRound0) && same(best.validation, kHbbtBest) &&
                      r0.control_false_positives == kHbbtRound0ControlFp &&
                      best.control_false_positives == kHbbtBestControlFp;
  return {improves && fewer_fp && frozen,
          fmt("F1 round 0 %.4f (tp %zu fp %zu fn %zu) -> best round %d %.4f (tp %zu fp %zu fn %zu); "
              "control FPs %zu -> %zu; frozen values %s",
              r0.validation.f1, r0.validation.tp, r0.validation.fp, r0.validation.fn, st.best_round,
              best.validation.f1, best.validation.tp, best.validation.fp, best.validation.fn,
              r0.control_false_positives, best.control_false_positives, frozen ? "match" : "DIFFER")};
}

constexpr Counts kBaseline{15, 19, 0};
constexpr Counts kRsgaia{15, 16, 0};
constexpr Counts kHbbt{14, 14, 1};
constexpr Counts kProposed{14, 13, 1};

Outcome ablation_ordering(double& seconds) {
  const auto& b = run_mode(cli::Mode::baseline);
  const auto& r = run_mode(cli::Mode::rsgaia);
  const auto& h = run_mode(cli::Mode::hbbt);
  const auto& p = run_mode(cli::Mode::rsgaia_hbbt);
  seconds = b.seconds + r.seconds + h.seconds + p.seconds;
  const double fb = b.outcome.validation.f1, fr = r.outcome.validation.f1;
  const double fh = h.outcome.validation.f1, fp = p.outcome.validation.f1;
  const bool ordered = fp >= fr && fp >= fh && fh >= fb;
  const bool frozen = same(b.outcome.validation, kBaseline) && same(r.outcome.validation, kRsgaia) &&
                      same(h.outcome.validation, kHbbt) && same(p.outcome.validation, kProposed);
  return {ordered && frozen,
          fmt("F1 baseline %.4f, R-sGAIA %.4f, HBBT %.4f, R-sGAIA+HBBT %.4f; frozen values %s", fb, fr,
              fh, fp, frozen ? "match" : "DIFFER")};
}

// ---------------------------------------------------------------------------------------------
// 8

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string without_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / fmt("foldaug_accept_%lld",
      static_cast<long long>(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(root);
  std::ostringstream sink;
  auto cli_run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };

  std::string detail;
  bool pass = false;
  if (cli_run({"gen", "--out", (root / "data").string(), "--seed", "20230101"}) != 0) {
    detail = "corpus generation failed: " + sink.str();
  } else {
    const auto manifest = (root / "data" / "manifest.json").string();
    int rc = 0;
    for (const char* run : {"a", "b"}) {
      rc |= cli_run({"train", "--manifest", manifest, "--mode", "rsgaia+hbbt", "--seed", "7", "--out",
                     (root / run).string()});
    }
    if (rc != 0) {
      detail = "training failed: " + sink.str();
    } else {
      std::size_t files = 0, differ = 0;
      for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
        if (!entry.is_regular_file() || entry.path().extension() != ".fdet") continue;
        const auto twin = root / "b" / fs::relative(entry.path(), root / "a");
        ++files;
        differ += !fs::exists(twin) || read_file(entry.path()) != read_file(twin);
      }
      const bool logs = without_last_column(read_file(root / "a" / "round_log.csv")) ==
                        without_last_column(read_file(root / "b" / "round_log.csv"));
      pass = files > 0 && differ == 0 && logs;
      detail = fmt("%zu checkpoints compared, %zu differ; round logs (wall_seconds excluded) %s", files,
                   differ, logs ? "identical" : "DIFFER");
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return {pass, detail};
}

// ---------------------------------------------------------------------------------------------
// 9

Outcome xi_selection(double& seconds) {
  const auto& model = *run_mode(cli::Mode::rsgaia_hbbt).outcome.model;
  const auto& val = bench::splits().held_out;
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<Annotation>> anns;
  for (const auto& li : val) {
    dets.push_back(model.infer(*li.image, 0.0));
    anns.push_back(li.annotations);
  }

  const auto start = std::chrono::steady_clock::now();
  const auto sel = evalkit::select_xi(dets, anns, 0.9, 0.5);

  // Exhaustive sweep: rematch from scratch at every distinct confidence.
  std::vector<double> thresholds;
  for (const auto& v : dets) {
    for (const auto& d : v) {
      if (d.label == ClassLabel::lesion) thresholds.push_back(d.confidence);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::optional<double> largest;
  for (double xi : thresholds) {
    std::size_t tp = 0, fn = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto m = evalkit::match_boxes(evalkit::lesion_detections_at(dets[i], xi), anns[i], 0.5);
      tp += m.pairs.size();
      fn += m.false_negatives.size();
    }
    if (tp + fn > 0 && static_cast<double>(tp) / static_cast<double>(tp + fn) >= 0.9) largest = xi;
  }
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const bool pass = largest.has_value() && sel.target_reached && sel.xi == *largest &&
                    sel.report.recall >= 0.9;
  return {pass, fmt("%zu thresholds swept; select_xi %.6f (recall %.4f, precision %.4f), sweep %.6f",
                    thresholds.size(), sel.xi, sel.report.recall, sel.report.precision,
                    largest.value_or(-1.0))};
}

// ---------------------------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  // Returns the outcome; may override the measured time (to exclude shared setup).
  std::function<Outcome(double&)> run;
};

}  // namespace

int main() {
  auto timed = [](Outcome (*f)()) {
    return [f](double&) { return f(); };
  };
  const std::vector<Criterion> criteria{
      {1, "F1 arithmetic", 1.0, timed(f1_arithmetic)},
      {2, "sigmoid midpoint and symmetry", 1.0, timed(sigmoid_midpoint_symmetry)},
      {3, "edge strength range and composition", 30.0, timed(edge_strength_composition)},
      {4, "mask sampling law", 30.0, timed(sampling_law)},
      {5, "oracle equivalence", 60.0, timed(oracle_equivalence)},
      {6, "HBBT efficacy", 600.0, hbbt_efficacy},
      {7, "ablation ordering", 1800.0, ablation_ordering},
      {8, "determinism", 1200.0, timed(determinism)},
      {9, "xi selection", 10.0, xi_selection},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    double seconds = -1.0;
    Outcome o;
    try {
      o = c.run(seconds);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (seconds < 0.0) {
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    const bool in_time = seconds < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %d  %-38s %8.2fs / %6.0fs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, seconds,
                c.budget_seconds, o.detail.c_str(), in_time ? "" : " [over time budget]");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

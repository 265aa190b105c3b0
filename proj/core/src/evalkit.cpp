#include "foldaug/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "foldaug/errors.hpp"
#include "parallel.hpp"

namespace foldaug::evalkit {
namespace {

// Lesion detections in matching order: confidence descending, input index ascending.
std::vector<std::size_t> matching_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].label == ClassLabel::lesion) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ImageMatch match_boxes(std::span<const Detection> detections,
                       std::span<const Annotation> annotations, double iou_threshold) {
  ImageMatch m;
  std::vector<bool> taken(annotations.size(), false);
  for (std::size_t d : matching_order(detections)) {
    std::size_t best = annotations.size();
    double best_iou = -1.0;
    for (std::size_t a = 0; a < annotations.size(); ++a) {
      if (taken[a] || annotations[a].label != ClassLabel::lesion) continue;
      const double o = iou(detections[d].box, annotations[a].box);
      if (o > best_iou) {
        best_iou = o;
        best = a;
      }
    }
    if (best < annotations.size() && best_iou >= iou_threshold) {
      taken[best] = true;
      m.pairs.push_back(MatchedPair{d, best, best_iou});
    } else {
      m.false_positives.push_back(d);
    }
  }
  for (std::size_t a = 0; a < annotations.size(); ++a) {
    if (!taken[a] && annotations[a].label == ClassLabel::lesion) m.false_negatives.push_back(a);
  }
  return m;
}

MetricsReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, double xi) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.xi = xi;
  r.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (r.precision > 0.0 && r.recall > 0.0)
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

MetricsReport compute_metrics(std::span<const ImageMatch> matches, double xi) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& m : matches) {
    tp += m.pairs.size();
    fp += m.false_positives.size();
    fn += m.false_negatives.size();
  }
  return metrics_from_counts(tp, fp, fn, xi);
}

std::vector<Detection> lesion_detections_at(std::span<const Detection> detections, double xi) {
  std::vector<Detection> out;
  for (const auto& d : detections) {
    if (d.label == ClassLabel::lesion && d.confidence >= xi) out.push_back(d);
  }
  return out;
}

XiSelection select_xi(std::span<const std::vector<Detection>> detections,
                      std::span<const std::vector<Annotation>> annotations, double target_recall,
                      double iou_threshold) {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw DomainError("target recall must lie in (0, 1]");
  }
  if (detections.size() != annotations.size()) {
    throw DimensionError("detection and annotation lists cover different image counts");
  }

  std::size_t total_annotations = 0;
  for (const auto& anns : annotations) {
    total_annotations += static_cast<std::size_t>(std::count_if(
        anns.begin(), anns.end(), [](const Annotation& a) { return a.label == ClassLabel::lesion; }));
  }

  // Greedy matching of a confidence-ordered prefix equals the prefix of the full matching, so
  // one pass labels every detection as TP or FP for all thresholds at once.
  std::vector<std::pair<double, bool>> outcomes;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const ImageMatch m = match_boxes(detections[i], annotations[i], iou_threshold);
    for (const auto& p : m.pairs) outcomes.emplace_back(detections[i][p.detection].confidence, true);
    for (std::size_t d : m.false_positives) outcomes.emplace_back(detections[i][d].confidence, false);
  }

  XiSelection sel;
  if (outcomes.empty()) {
    sel.xi = 0.0;
    sel.report = metrics_from_counts(0, 0, total_annotations, 0.0);
    sel.target_reached = false;
    return sel;
  }

  std::sort(outcomes.begin(), outcomes.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < outcomes.size();) {
    const double xi = outcomes[i].first;
    for (; i < outcomes.size() && outcomes[i].first == xi; ++i) {
      (outcomes[i].second ? tp : fp) += 1;
    }
    const MetricsReport r = metrics_from_counts(tp, fp, total_annotations - tp, xi);
    sel.xi = xi;
    sel.report = r;
    if (total_annotations > 0 && r.recall >= target_recall) {
      sel.target_reached = true;
      return sel;
    }
  }
  return sel;
}

int FoldSplit::fold_of(const std::string& patient) const {
  const auto it = patient_fold.find(patient);
  if (it == patient_fold.end()) throw SplitError("patient " + patient + " is not in the split");
  return it->second;
}

FoldSplit split_by_patient(const DatasetManifest& manifest, int k, RngSeed seed) {
  std::set<std::string> unique;
  for (const auto& r : manifest.records) unique.insert(r.patient);
  std::vector<std::string> patients(unique.begin(), unique.end());
  if (k < 1) throw SplitError("fold count must be >= 1");
  if (static_cast<std::size_t>(k) > patients.size()) {
    throw SplitError("cannot split " + std::to_string(patients.size()) + " patients into " +
                     std::to_string(k) + " folds");
  }
  Rng rng(seed);
  rng.shuffle(patients.begin(), patients.end());
  FoldSplit split;
  split.folds = k;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    split.patient_fold[patients[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return split;
}

Evaluation evaluate_detections(std::vector<std::vector<Detection>> detections,
                               std::span<const std::vector<Annotation>> annotations,
                               const EvalSettings& settings) {
  Evaluation ev;
  double xi = 0.0;
  if (settings.xi) {
    xi = *settings.xi;
  } else {
    const XiSelection sel =
        select_xi(detections, annotations, settings.target_recall, settings.iou_threshold);
    xi = sel.xi;
    ev.target_reached = sel.target_reached;
  }
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto kept = lesion_detections_at(detections[i], xi);
    ev.matches.push_back(match_boxes(kept, annotations[i], settings.iou_threshold));
  }
  ev.report = compute_metrics(ev.matches, xi);
  ev.detections = std::move(detections);
  return ev;
}

Evaluation evaluate(const detector::Model& model, std::span<const detector::LabeledImage> images,
                    const EvalSettings& settings) {
  std::vector<std::vector<Detection>> dets(images.size());
  const double floor = settings.xi ? *settings.xi : 0.0;
  foldaug::detail::parallel_for(images.size(), [&](std::size_t i) {
    dets[i] = model.infer(*images[i].image, floor);
  });
  std::vector<std::vector<Annotation>> anns;
  anns.reserve(images.size());
  for (const auto& im : images) anns.push_back(im.annotations);
  return evaluate_detections(std::move(dets), anns, settings);
}

SweepResult gamma_sweep(std::span<const double> gammas, const rsgaia::AugmentConfig& base,
                        const detector::Trainer& trainer,
                        std::span<const detector::LabeledImage> train_set,
                        std::span<const detector::LabeledImage> validation_set,
                        const EvalSettings& settings, RngSeed seed) {
  if (gammas.empty()) throw DomainError("gamma list is empty");
  SweepResult result;
  double best_f1 = -1.0;
  for (double gamma : gammas) {
    rsgaia::AugmentConfig cfg = base;
    cfg.gamma = gamma;
    cfg.validate();
    const detector::AugmentHook hook = [cfg](const GrayImage& img, RngSeed s) {
      return rsgaia::augment(img, cfg, s);
    };
    const auto model = trainer.train(train_set, hook, seed);
    const Evaluation ev = evaluate(*model, validation_set, settings);
    result.rows.push_back(SweepRow{gamma, ev.report});
    if (ev.report.f1 > best_f1) {
      best_f1 = ev.report.f1;
      result.best_gamma = gamma;
    }
  }
  return result;
}

std::string metrics_csv_header() { return "label,precision,recall,f1,tp,fp,fn,xi,config_hash\n"; }

std::string metrics_csv_row(const std::string& label, const MetricsReport& r,
                            const std::string& config_hash) {
  std::ostringstream out;
  out << label << ',' << fmt(r.precision) << ',' << fmt(r.recall) << ',' << fmt(r.f1) << ','
      << r.tp << ',' << r.fp << ',' << r.fn << ',' << fmt(r.xi) << ',' << config_hash << '\n';
  return out.str();
}

std::string format_sweep_csv(const SweepResult& result, const std::string& config_hash) {
  std::ostringstream out;
  out << "gamma,precision,recall,f1,tp,fp,fn,xi,config_hash\n";
  for (const auto& row : result.rows) {
    const auto& r = row.report;
    out << fmt(row.gamma) << ',' << fmt(r.precision) << ',' << fmt(r.recall) << ',' << fmt(r.f1)
        << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << fmt(r.xi) << ',' << config_hash
        << '\n';
  }
  return out.str();
}

}  // namespace foldaug::evalkit

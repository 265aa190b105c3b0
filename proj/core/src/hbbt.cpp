#include "foldaug/hbbt.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "foldaug/errors.hpp"
#include "parallel.hpp"

namespace foldaug::hbbt {
namespace {

using detector::LabeledImage;
using detector::Model;

bool in_unit(double v) { return v > 0.0 && v <= 1.0; }

std::vector<std::vector<Detection>> run_inference(const Model& model,
                                                  std::span<const LabeledImage> images,
                                                  double min_conf) {
  std::vector<std::vector<Detection>> out(images.size());
  foldaug::detail::parallel_for(
      images.size(), [&](std::size_t i) { out[i] = model.infer(*images[i].image, min_conf); });
  return out;
}

std::shared_ptr<const Model> stamp_round(std::shared_ptr<const Model> model, int round,
                                         RngSeed seed) {
  if (const auto* sw = dynamic_cast<const detector::SlidingWindowModel*>(model.get())) {
    if (sw->round() == static_cast<std::uint32_t>(round)) return model;
    auto copy = std::make_shared<detector::SlidingWindowModel>(*sw);
    copy->set_metadata(static_cast<std::uint32_t>(round), seed.value);
    return copy;
  }
  return model;
}

}  // namespace

void HbbtConfig::validate() const {
  if (!in_unit(tau_fp)) throw DomainError("tau_fp must lie in (0, 1]");
  if (!in_unit(xi_hard)) throw DomainError("xi_hard must lie in (0, 1]");
  if (!in_unit(tau_dup)) throw DomainError("tau_dup must lie in (0, 1]");
  if (!in_unit(eval_xi)) throw DomainError("eval_xi must lie in (0, 1]");
  if (!in_unit(match_iou)) throw DomainError("match_iou must lie in (0, 1]");
  if (max_rounds < 1) throw DomainError("max_rounds must be >= 1");
  if (patience < 1) throw DomainError("patience must be >= 1");
  if (per_image_cap < 1) throw DomainError("per-image hard-box cap must be >= 1");
}

std::size_t HbbtState::hard_pool_size() const {
  std::size_t n = 0;
  for (const auto& boxes : hard_pool) n += boxes.size();
  return n;
}

std::vector<Annotation> mine_hard_boxes(std::span<const Detection> detections,
                                        std::span<const Annotation> annotations,
                                        std::span<const Annotation> pool, const HbbtConfig& cfg) {
  std::vector<const Detection*> order;
  for (const auto& d : detections) {
    if (d.label == ClassLabel::lesion && d.confidence >= cfg.xi_hard) order.push_back(&d);
  }
  std::stable_sort(order.begin(), order.end(), [](const Detection* a, const Detection* b) {
    return a->confidence > b->confidence;
  });

  std::vector<Annotation> mined;
  const auto near = [&](const BoundingBox& box, std::span<const Annotation> boxes) {
    return std::any_of(boxes.begin(), boxes.end(),
                       [&](const Annotation& a) { return iou(a.box, box) >= cfg.tau_dup; });
  };
  for (const Detection* d : order) {
    if (static_cast<int>(mined.size()) >= cfg.per_image_cap) break;
    const bool hits_lesion =
        std::any_of(annotations.begin(), annotations.end(), [&](const Annotation& a) {
          return a.label == ClassLabel::lesion && iou(a.box, d->box) >= cfg.tau_fp;
        });
    if (hits_lesion || near(d->box, pool) || near(d->box, mined)) continue;
    mined.push_back(Annotation{d->box, ClassLabel::hard_sample});
  }
  return mined;
}

HbbtResult run_hbbt(const detector::Trainer& trainer, std::span<const LabeledImage> train_set,
                    std::span<const LabeledImage> control_set,
                    std::span<const LabeledImage> validation_set,
                    const detector::AugmentHook& augment, const HbbtConfig& cfg, RngSeed seed,
                    const RoundCallback& on_round) {
  cfg.validate();

  // Mining runs over train images followed by control images, lesion annotations only.
  std::vector<LabeledImage> mining;
  for (const auto& im : train_set) {
    LabeledImage li{im.image, {}};
    for (const auto& a : im.annotations) {
      if (a.label == ClassLabel::lesion) li.annotations.push_back(a);
    }
    mining.push_back(std::move(li));
  }
  for (const auto& im : control_set) mining.push_back(LabeledImage{im.image, {}});
  const std::size_t n_train = train_set.size();
  const double mining_floor = std::min(cfg.xi_hard, cfg.eval_xi);

  HbbtState state;
  state.hard_pool.assign(mining.size(), {});
  std::shared_ptr<const Model> current;
  std::vector<std::vector<Detection>> mining_dets;
  double best_f1 = -1.0;
  int since_best = 0;

  for (int round = 0; round < cfg.max_rounds; ++round) {
    const auto start = std::chrono::steady_clock::now();
    RoundRecord rec;
    rec.round = round;

    bool retrain = round == 0;
    if (round > 0) {
      std::vector<std::vector<Annotation>> fresh(mining.size());
      foldaug::detail::parallel_for(mining.size(), [&](std::size_t i) {
        fresh[i] = mine_hard_boxes(mining_dets[i], mining[i].annotations, state.hard_pool[i], cfg);
      });
      for (std::size_t i = 0; i < mining.size(); ++i) {
        rec.new_hard_boxes += fresh[i].size();
        state.hard_pool[i].insert(state.hard_pool[i].end(), fresh[i].begin(), fresh[i].end());
      }
      retrain = rec.new_hard_boxes > 0;
    }
    rec.hard_boxes_total = state.hard_pool_size();

    if (retrain) {
      std::vector<LabeledImage> dataset;
      for (std::size_t i = 0; i < mining.size(); ++i) {
        if (i >= n_train && state.hard_pool[i].empty()) continue;
        LabeledImage li = mining[i];
        li.annotations.insert(li.annotations.end(), state.hard_pool[i].begin(),
                              state.hard_pool[i].end());
        dataset.push_back(std::move(li));
      }
      try {
        current = stamp_round(trainer.train(dataset, augment, seed), round, seed);
      } catch (const TrainingError& e) {
        throw TrainingError("round " + std::to_string(round) + ": " + e.what(), e.index(), round);
      } catch (const Error& e) {
        throw TrainingError("round " + std::to_string(round) + ": " + e.what(),
                            TrainingError::npos, round);
      }
      mining_dets = run_inference(*current, mining, mining_floor);
    }

    const evalkit::EvalSettings settings{cfg.match_iou, cfg.eval_xi, 0.9};
    rec.validation = evalkit::evaluate(*current, validation_set, settings).report;
    for (std::size_t i = n_train; i < mining.size(); ++i) {
      rec.control_false_positives += evalkit::lesion_detections_at(mining_dets[i], cfg.eval_xi).size();
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    state.round = round;
    state.f1_history.emplace_back(round, rec.validation.f1);
    if (rec.validation.f1 > best_f1) {
      best_f1 = rec.validation.f1;
      state.best_round = round;
      state.best_model = current;
      since_best = 0;
    } else {
      ++since_best;
    }
    state.log.push_back(rec);
    if (on_round) on_round(rec, *current, state);
    if (since_best >= cfg.patience) break;
  }

  return HbbtResult{state.best_model, std::move(state)};
}

std::string format_round_log(std::span<const RoundRecord> log) {
  std::ostringstream out;
  out << "round,train_hard_boxes_total,new_hard_boxes,validation_precision,validation_recall,"
         "validation_f1,wall_seconds\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%zu,%.6f,%.6f,%.6f,%.3f\n", r.round,
                  r.hard_boxes_total, r.new_hard_boxes, r.validation.precision,
                  r.validation.recall, r.validation.f1, r.wall_seconds);
    out << buf;
  }
  return out.str();
}

}  // namespace foldaug::hbbt

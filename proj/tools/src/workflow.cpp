#include "foldaug_cli/workflow.hpp"

#include "foldaug/errors.hpp"
#include "foldaug/image_io.hpp"
#include "foldaug/rsgaia.hpp"

namespace foldaug::cli {
namespace {

detector::LabeledImage view(const Corpus& corpus, std::size_t i) {
  return {&corpus.images[i], corpus.manifest.records[i].annotations};
}

// Hard-sample annotations from an earlier loop are not ground truth for a fresh run.
detector::LabeledImage lesions_only(detector::LabeledImage li) {
  std::erase_if(li.annotations, [](const Annotation& a) { return a.label != ClassLabel::lesion; });
  return li;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& manifest_path) {
  Corpus corpus;
  corpus.manifest = load_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  corpus.images.reserve(corpus.manifest.records.size());
  for (std::size_t i = 0; i < corpus.manifest.records.size(); ++i) {
    const auto& rec = corpus.manifest.records[i];
    GrayImage img = io::read_image(root / rec.image);
    if (img.width() != rec.width || img.height() != rec.height) {
      throw ParseError("image " + rec.image + " does not match its recorded size", i);
    }
    corpus.images.push_back(std::move(img));
  }
  return corpus;
}

Corpus corpus_from_generated(std::vector<synthgen::GeneratedImage> generated) {
  Corpus corpus;
  for (auto& g : generated) {
    corpus.manifest.records.push_back(std::move(g.record));
    corpus.images.push_back(std::move(g.image));
  }
  return corpus;
}

Splits make_splits(const Corpus& corpus, std::string_view train_split,
                   std::string_view eval_split) {
  Splits s;
  for (std::size_t i = 0; i < corpus.manifest.records.size(); ++i) {
    const auto& rec = corpus.manifest.records[i];
    if (rec.split == train_split) {
      if (rec.is_control()) {
        s.controls.push_back(lesions_only(view(corpus, i)));
        s.control_records.push_back(i);
      } else {
        s.positives.push_back(lesions_only(view(corpus, i)));
        s.positive_records.push_back(i);
      }
    }
    if (rec.split == eval_split) {
      s.held_out.push_back(lesions_only(view(corpus, i)));
      s.held_out_records.push_back(i);
    }
  }
  return s;
}

Splits make_fold_splits(const Corpus& corpus, const evalkit::FoldSplit& split, int fold) {
  Splits s;
  for (std::size_t i = 0; i < corpus.manifest.records.size(); ++i) {
    const auto& rec = corpus.manifest.records[i];
    if (split.fold_of(rec.patient) == fold) {
      s.held_out.push_back(lesions_only(view(corpus, i)));
      s.held_out_records.push_back(i);
    } else if (rec.is_control()) {
      s.controls.push_back(lesions_only(view(corpus, i)));
      s.control_records.push_back(i);
    } else {
      s.positives.push_back(lesions_only(view(corpus, i)));
      s.positive_records.push_back(i);
    }
  }
  return s;
}

Mode parse_mode(std::string_view text) {
  if (text == "baseline") return Mode::baseline;
  if (text == "rsgaia") return Mode::rsgaia;
  if (text == "hbbt") return Mode::hbbt;
  if (text == "rsgaia+hbbt") return Mode::rsgaia_hbbt;
  throw ParseError("unknown mode " + std::string(text) +
                   " (expected baseline, rsgaia, hbbt or rsgaia+hbbt)");
}

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::baseline: return "baseline";
    case Mode::rsgaia: return "rsgaia";
    case Mode::hbbt: return "hbbt";
    case Mode::rsgaia_hbbt: return "rsgaia+hbbt";
  }
  return "baseline";
}

bool uses_augmentation(Mode mode) noexcept {
  return mode == Mode::rsgaia || mode == Mode::rsgaia_hbbt;
}

bool uses_hbbt(Mode mode) noexcept { return mode == Mode::hbbt || mode == Mode::rsgaia_hbbt; }

TrainOutcome train_mode(const Splits& splits, Mode mode, const config::RunSettings& settings,
                        RngSeed seed, const hbbt::RoundCallback& on_round) {
  detector::AugmentHook hook;
  if (uses_augmentation(mode)) {
    const rsgaia::AugmentConfig cfg = settings.augment;
    cfg.validate();
    hook = [cfg](const GrayImage& img, RngSeed s) { return rsgaia::augment(img, cfg, s); };
  }
  const detector::SlidingWindowTrainer trainer(settings.detector);

  hbbt::HbbtConfig cfg = settings.hbbt;
  cfg.match_iou = settings.eval.iou_threshold;
  if (!uses_hbbt(mode)) cfg.max_rounds = 1;

  const std::span<const detector::LabeledImage> controls =
      uses_hbbt(mode) ? std::span<const detector::LabeledImage>(splits.controls)
                      : std::span<const detector::LabeledImage>();
  auto result =
      hbbt::run_hbbt(trainer, splits.positives, controls, splits.held_out, hook, cfg, seed, on_round);

  TrainOutcome out;
  out.model = result.model;
  out.log = result.state.log;
  out.validation = out.log.at(static_cast<std::size_t>(result.state.best_round)).validation;
  if (uses_hbbt(mode)) out.state = std::move(result.state);
  return out;
}

CrossValidation cross_validate(const Corpus& corpus, Mode mode, const config::RunSettings& settings,
                               RngSeed seed) {
  const auto split = evalkit::split_by_patient(corpus.manifest, settings.folds, seed);
  CrossValidation cv;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (int f = 0; f < split.folds; ++f) {
    Splits s = make_fold_splits(corpus, split, f);
    if (s.positives.empty()) throw SplitError("fold " + std::to_string(f) + " has no lesion images to train on");
    config::RunSettings fold_settings = settings;
    std::vector<detector::LabeledImage> held_out = std::move(s.held_out);
    s.held_out.clear();
    // The held-out fold must not steer the hard-box loop, so it validates on training images.
    s.held_out = s.positives;
    const TrainOutcome trained = train_mode(s, mode, fold_settings, seed);
    const auto ev = evalkit::evaluate(*trained.model, held_out, settings.eval);
    cv.folds.push_back(FoldReport{f, held_out.size(), ev.report});
    tp += ev.report.tp;
    fp += ev.report.fp;
    fn += ev.report.fn;
  }
  cv.aggregate = evalkit::metrics_from_counts(tp, fp, fn, settings.eval.xi.value_or(0.0));
  return cv;
}

}  // namespace foldaug::cli

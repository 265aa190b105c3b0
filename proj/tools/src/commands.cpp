#include "foldaug_cli/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "foldaug/errors.hpp"
#include "foldaug/image_io.hpp"
#include "foldaug/kv_config.hpp"
#include "foldaug/rsgaia.hpp"
#include "foldaug_cli/overlay.hpp"
#include "foldaug_cli/workflow.hpp"

namespace foldaug::cli {
namespace fs = std::filesystem;

OutputLock::OutputLock(const fs::path& dir) : path_(dir / kFileName) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IoError("output directory " + dir.string() + " is locked by another run (" +
                    path_.string() + ")");
    }
    throw IoError("cannot create lock file " + path_.string());
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

config::RunSettings settings_for(const Common& c) {
  config::RunSettings s;
  if (!c.config.empty()) s = config::load_settings(c.config);
  s.seed = c.seed;
  return s;
}

std::string stem_of(const std::string& image) {
  std::string s = fs::path(image).replace_extension().generic_string();
  for (char& ch : s) {
    if (ch == '/') ch = '_';
  }
  return s;
}

int cmd_gen(const Common& c, std::ostream& out) {
  config::RunSettings s = settings_for(c);
  s.corpus.seed = c.seed;
  const fs::path dir(c.out);
  OutputLock lock(dir);
  const DatasetManifest manifest = synthgen::generate_corpus(s.corpus, dir);
  out << synthgen::format_summary(synthgen::describe_corpus(manifest));
  return kOk;
}

int cmd_augment(const Common& c, const std::string& input, int n, bool dump, std::ostream& out) {
  const config::RunSettings s = settings_for(c);
  const GrayImage img = io::read_image(input);
  const fs::path dir(c.out);
  OutputLock lock(dir);
  for (int i = 0; i < n; ++i) {
    const RngSeed seed = derive_seed(RngSeed{c.seed}, static_cast<std::uint64_t>(i));
    char name[32];
    std::snprintf(name, sizeof name, "aug_%02d", i);
    const std::string base = name;
    if (dump) {
      const auto trace = rsgaia::augment_traced(img, s.augment, seed);
      io::write_png(dir / (base + ".png"), trace.output);
      io::write_field(dir / (base + "_edge.rfld"), trace.edge);
      io::write_field(dir / (base + "_prob.rfld"), trace.probability);
      io::write_png(dir / (base + "_mask.png"), io::mask_to_image(trace.mask));
    } else {
      io::write_png(dir / (base + ".png"), rsgaia::augment(img, s.augment, seed));
    }
    out << (dir / (base + ".png")).string() << '\n';
  }
  return kOk;
}

DatasetManifest hard_pool_manifest(const Corpus& corpus, const Splits& splits,
                                   const hbbt::HbbtState& state, const fs::path& manifest_dir,
                                   const fs::path& out_dir) {
  DatasetManifest m;
  std::vector<std::size_t> records = splits.positive_records;
  records.insert(records.end(), splits.control_records.begin(), splits.control_records.end());
  for (std::size_t i = 0; i < records.size() && i < state.hard_pool.size(); ++i) {
    ManifestRecord rec = corpus.manifest.records[records[i]];
    rec.image = fs::proximate(manifest_dir / rec.image, out_dir).generic_string();
    rec.annotations = state.hard_pool[i];
    rec.distractors.clear();
    m.records.push_back(std::move(rec));
  }
  return m;
}

int cmd_train(const Common& c, const std::string& manifest_path, const std::string& mode_text,
              std::ostream& out) {
  const Mode mode = parse_mode(mode_text);
  const config::RunSettings s = settings_for(c);
  const Corpus corpus = load_corpus(manifest_path);
  const Splits splits = make_splits(corpus);
  if (splits.positives.empty()) throw ParseError("manifest has no training images with lesions");

  const fs::path dir(c.out);
  OutputLock lock(dir);
  if (uses_hbbt(mode)) fs::create_directories(dir / "rounds");
  const fs::path manifest_dir = fs::absolute(fs::path(manifest_path)).parent_path();

  const auto on_round = [&](const hbbt::RoundRecord& rec, const detector::Model& model,
                            const hbbt::HbbtState& state) {
    out << "round " << rec.round << ": hard boxes " << rec.hard_boxes_total << " (+"
        << rec.new_hard_boxes << "), validation F1 " << rec.validation.f1
        << ", control false positives " << rec.control_false_positives << '\n';
    if (uses_hbbt(mode)) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%02d.fdet", rec.round);
      detector::save_checkpoint(dir / "rounds" / name, model);
      save_manifest(dir / "hard_pool.json",
                    hard_pool_manifest(corpus, splits, state, manifest_dir, fs::absolute(dir)));
    }
  };

  TrainOutcome trained;
  try {
    trained = train_mode(splits, mode, s, RngSeed{c.seed}, on_round);
  } catch (const TrainingError& e) {
    throw TrainingError(std::string("train: ") + e.what(), e.index(), e.round());
  }

  const std::string hash = config::config_hash(s);
  detector::save_checkpoint(dir / "model.fdet", *trained.model);
  write_text(dir / "round_log.csv", hbbt::format_round_log(trained.log));
  write_text(dir / "metrics.csv", evalkit::metrics_csv_header() +
                                      evalkit::metrics_csv_row("validation", trained.validation, hash));
  write_text(dir / "config.txt", config::canonical_text(s));

  nlohmann::ordered_json info;
  info["mode"] = std::string(to_string(mode));
  info["seed"] = c.seed;
  info["config_hash"] = hash;
  info["best_round"] = trained.state ? trained.state->best_round : 0;
  info["rounds"] = trained.log.size();
  info["validation_f1"] = trained.validation.f1;
  write_text(dir / "run_info.json", info.dump(2) + "\n");

  out << "mode " << to_string(mode) << ": validation F1 " << trained.validation.f1 << " (P "
      << trained.validation.precision << ", R " << trained.validation.recall << ")\n";
  return kOk;
}

evalkit::EvalSettings eval_settings(config::RunSettings s, const std::optional<double>& xi,
                                    const std::optional<double>& target) {
  if (xi) s.eval.xi = *xi;
  if (target) {
    s.eval.xi.reset();
    s.eval.target_recall = *target;
  }
  return s.eval;
}

int cmd_eval(const Common& c, const std::string& manifest_path, const std::string& checkpoint,
             const std::string& split, int folds, const std::string& mode_text,
             const std::optional<double>& xi, const std::optional<double>& target,
             std::ostream& out) {
  config::RunSettings s = settings_for(c);
  s.eval = eval_settings(s, xi, target);
  const Corpus corpus = load_corpus(manifest_path);
  const fs::path dir(c.out);
  const std::string hash = config::config_hash(s);

  if (folds > 0) {
    s.folds = folds;
    const Mode mode = parse_mode(mode_text);
    OutputLock lock(dir);
    const CrossValidation cv = cross_validate(corpus, mode, s, RngSeed{c.seed});
    std::string csv = evalkit::metrics_csv_header();
    for (const auto& f : cv.folds) {
      csv += evalkit::metrics_csv_row("fold" + std::to_string(f.fold), f.report, hash);
    }
    csv += evalkit::metrics_csv_row("aggregate", cv.aggregate, hash);
    write_text(dir / "cv_metrics.csv", csv);
    out << folds << "-fold aggregate F1 " << cv.aggregate.f1 << '\n';
    return kOk;
  }

  if (checkpoint.empty()) throw ParseError("eval needs --checkpoint unless --folds is given");
  const auto model = detector::load_checkpoint(checkpoint);
  const Splits splits = make_splits(corpus, "train", split);
  OutputLock lock(dir);
  fs::create_directories(dir / "overlays");

  const auto start = std::chrono::steady_clock::now();
  const auto ev = evalkit::evaluate(*model, splits.held_out, s.eval);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::string csv = evalkit::metrics_csv_header();
  for (std::size_t i = 0; i < splits.held_out.size(); ++i) {
    const auto& rec = corpus.manifest.records[splits.held_out_records[i]];
    const auto per_image = evalkit::compute_metrics(std::span(&ev.matches[i], 1), ev.report.xi);
    csv += evalkit::metrics_csv_row(rec.image, per_image, hash);
    const auto kept = evalkit::lesion_detections_at(ev.detections[i], ev.report.xi);
    io::write_png(dir / "overlays" / (stem_of(rec.image) + ".png"),
                  draw_overlay(*splits.held_out[i].image, splits.held_out[i].annotations, kept));
  }
  if (!splits.held_out.empty()) csv += evalkit::metrics_csv_row("all", ev.report, hash);
  write_text(dir / "metrics.csv", csv);

  out << "images " << splits.held_out.size() << ", xi " << ev.report.xi << ", precision "
      << ev.report.precision << ", recall " << ev.report.recall << ", F1 " << ev.report.f1 << '\n';
  if (!s.eval.xi && !ev.target_reached) out << "target recall not reached\n";
  if (!splits.held_out.empty()) {
    out << "throughput " << seconds / static_cast<double>(splits.held_out.size())
        << " s/image\n";
  }
  return kOk;
}

int cmd_sweep(const Common& c, const std::string& manifest_path, const std::vector<double>& gammas,
              const std::optional<double>& xi, const std::optional<double>& target,
              std::ostream& out) {
  config::RunSettings s = settings_for(c);
  s.eval = eval_settings(s, xi, target);
  if (!s.eval.xi && !target) s.eval.xi = s.hbbt.eval_xi;
  const Corpus corpus = load_corpus(manifest_path);
  const Splits splits = make_splits(corpus);
  if (splits.positives.empty()) throw ParseError("manifest has no training images with lesions");
  const fs::path dir(c.out);
  OutputLock lock(dir);
  const detector::SlidingWindowTrainer trainer(s.detector);
  const auto result = evalkit::gamma_sweep(gammas, s.augment, trainer, splits.positives,
                                           splits.held_out, s.eval, RngSeed{c.seed});
  write_text(dir / "sweep.csv", evalkit::format_sweep_csv(result, config::config_hash(s)));
  for (const auto& row : result.rows) {
    out << "gamma " << row.gamma << ": F1 " << row.report.f1 << '\n';
  }
  out << "selected gamma " << result.best_gamma << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"foldaug: fold-aware augmentation and hard-box training toolkit", "foldaug"};
  app.require_subcommand(1);

  Common common;
  std::string input, manifest, mode = "baseline", checkpoint, split = "validation";
  int n = 1;
  int folds = 0;
  bool dump = false;
  std::optional<double> xi, target;
  std::vector<double> gammas{2, 4, 6, 8, 10};

  const auto add_common = [&](CLI::App* sub, bool seeded) {
    sub->add_option("--config", common.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "output directory")->required();
    auto* seed = sub->add_option("--seed", common.seed, "master seed");
    if (seeded) seed->required();
  };

  auto* gen = app.add_subcommand("gen", "generate the synthetic corpus and manifest");
  add_common(gen, true);

  auto* aug = app.add_subcommand("augment", "write augmented views of one image");
  add_common(aug, true);
  aug->add_option("--in", input, "input image (PNG or PGM)")->required()->check(CLI::ExistingFile);
  aug->add_option("--n", n, "number of views")->check(CLI::PositiveNumber);
  aug->add_flag("--dump-intermediates", dump, "also write edge, probability and mask");

  auto* train = app.add_subcommand("train", "train a detector");
  add_common(train, true);
  train->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--mode", mode, "baseline, rsgaia, hbbt or rsgaia+hbbt");

  auto* eval = app.add_subcommand("eval", "score a checkpoint, or cross-validate with --folds");
  add_common(eval, false);
  eval->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--split", split, "split to evaluate");
  auto* folds_opt = eval->add_option("--folds", folds, "patient-wise folds")->check(CLI::PositiveNumber);
  eval->add_option("--mode", mode, "training mode for --folds");
  auto* xi_opt = eval->add_option("--xi", xi, "confidence threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--target-recall", target, "choose the threshold for this recall")
      ->check(CLI::Range(0.0, 1.0))
      ->excludes(xi_opt);

  auto* sweep = app.add_subcommand("sweep", "gamma sweep on the validation split");
  add_common(sweep, true);
  sweep->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  sweep->add_option("--gammas", gammas, "gamma values")->delimiter(',');
  auto* sxi = sweep->add_option("--xi", xi, "confidence threshold")->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--target-recall", target, "choose the threshold for this recall")
      ->check(CLI::Range(0.0, 1.0))
      ->excludes(sxi);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (*folds_opt && eval->count("--seed") == 0) {
      throw CLI::RequiredError("--seed is required with --folds");
    }
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "foldaug: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen(common, out);
    if (*aug) return cmd_augment(common, input, n, dump, out);
    if (*train) return cmd_train(common, manifest, mode, out);
    if (*eval) return cmd_eval(common, manifest, checkpoint, split, folds, mode, xi, target, out);
    if (*sweep) return cmd_sweep(common, manifest, gammas, xi, target, out);
  } catch (const TrainingError& e) {
    err << "foldaug: training failed: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "foldaug: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "foldaug: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "foldaug: internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUsage;
}

}  // namespace foldaug::cli

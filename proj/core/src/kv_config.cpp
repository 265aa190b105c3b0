#include "foldaug/kv_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "foldaug/errors.hpp"

namespace foldaug::config {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ParseError("value of " + key + " is not a number: " + v);
  }
  return out;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ParseError("value of " + key + " is not an integer: " + v);
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunSettings&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunSettings&)> get;
};

template <class T>
Field real(T RunSettings::*section, double T::*member) {
  return {[=](RunSettings& s, const std::string& k, const std::string& v) {
            s.*section.*member = to_double(k, v);
          },
          [=](const RunSettings& s) { return num(s.*section.*member); }};
}

template <class T, class Int>
Field integer(T RunSettings::*section, Int T::*member) {
  return {[=](RunSettings& s, const std::string& k, const std::string& v) {
            s.*section.*member = to_int<Int>(k, v);
          },
          [=](const RunSettings& s) { return std::to_string(s.*section.*member); }};
}

const std::map<std::string, Field>& fields() {
  using rsgaia::AugmentConfig;
  using detector::DetectorHyper;
  using hbbt::HbbtConfig;
  using synthgen::CorpusSpec;
  using evalkit::EvalSettings;
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    const auto A = &RunSettings::augment;
    t["augment.gamma"] = real(A, &AugmentConfig::gamma);
    t["augment.theta"] = real(A, &AugmentConfig::theta);
    t["augment.alpha_min"] = real(A, &AugmentConfig::alpha_min);
    t["augment.alpha_max"] = real(A, &AugmentConfig::alpha_max);
    t["augment.beta_min"] = real(A, &AugmentConfig::beta_min);
    t["augment.beta_max"] = real(A, &AugmentConfig::beta_max);
    t["augment.open_radius"] = integer(A, &AugmentConfig::open_radius);
    t["augment.gradient_sigma"] = real(A, &AugmentConfig::gradient_sigma);
    t["augment.highpass_cutoff"] = real(A, &AugmentConfig::highpass_cutoff);
    t["augment.highpass_order"] = integer(A, &AugmentConfig::highpass_order);
    t["augment.probability_mode"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          if (v == "sigmoid") s.augment.probability_mode = rsgaia::ProbabilityMode::sigmoid;
          else if (v == "step_table") s.augment.probability_mode = rsgaia::ProbabilityMode::step_table;
          else throw ParseError(k + " must be sigmoid or step_table");
        },
        [](const RunSettings& s) {
          return std::string(s.augment.probability_mode == rsgaia::ProbabilityMode::sigmoid
                                 ? "sigmoid"
                                 : "step_table");
        }};
    t["augment.composition"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          if (v == "regional") s.augment.composition_mode = rsgaia::CompositionMode::regional;
          else if (v == "literal") s.augment.composition_mode = rsgaia::CompositionMode::literal;
          else throw ParseError(k + " must be regional or literal");
        },
        [](const RunSettings& s) {
          return std::string(s.augment.composition_mode == rsgaia::CompositionMode::regional
                                 ? "regional"
                                 : "literal");
        }};
    t["augment.step_table"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          std::vector<rsgaia::StepBucket> table;
          for (const auto& item : split(v, ',')) {
            const auto parts = split(item, ':');
            if (parts.size() != 2) throw ParseError(k + " entries must be upper:probability");
            table.push_back({to_double(k, parts[0]), to_double(k, parts[1])});
          }
          s.augment.step_table = std::move(table);
        },
        [](const RunSettings& s) {
          std::string out;
          for (const auto& b : s.augment.step_table) {
            if (!out.empty()) out += ',';
            out += num(b.upper) + ':' + num(b.probability);
          }
          return out;
        }};

    const auto D = &RunSettings::detector;
    t["detector.window_sizes"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          std::vector<int> sizes;
          for (const auto& item : split(v, ',')) sizes.push_back(to_int<int>(k, item));
          s.detector.window_sizes = std::move(sizes);
        },
        [](const RunSettings& s) {
          std::string out;
          for (int w : s.detector.window_sizes) {
            if (!out.empty()) out += ',';
            out += std::to_string(w);
          }
          return out;
        }};
    t["detector.stride_fraction"] = real(D, &DetectorHyper::stride_fraction);
    t["detector.nms_iou"] = real(D, &DetectorHyper::nms_iou);
    t["detector.positive_iou"] = real(D, &DetectorHyper::positive_iou);
    t["detector.background_iou"] = real(D, &DetectorHyper::background_iou);
    t["detector.epochs"] = integer(D, &DetectorHyper::epochs);
    t["detector.background_per_image"] = integer(D, &DetectorHyper::background_per_image);
    t["detector.bootstrap_rounds"] = integer(D, &DetectorHyper::bootstrap_rounds);
    t["detector.partial_per_image"] = integer(D, &DetectorHyper::partial_per_image);
    t["detector.bootstrap_per_image"] = integer(D, &DetectorHyper::bootstrap_per_image);
    t["detector.iterations"] = integer(D, &DetectorHyper::iterations);
    t["detector.learning_rate"] = real(D, &DetectorHyper::learning_rate);
    t["detector.l2"] = real(D, &DetectorHyper::l2);
    t["detector.object_class_weight"] = real(D, &DetectorHyper::object_class_weight);
    t["detector.score_floor"] = real(D, &DetectorHyper::score_floor);

    const auto H = &RunSettings::hbbt;
    t["hbbt.tau_fp"] = real(H, &HbbtConfig::tau_fp);
    t["hbbt.xi_hard"] = real(H, &HbbtConfig::xi_hard);
    t["hbbt.tau_dup"] = real(H, &HbbtConfig::tau_dup);
    t["hbbt.max_rounds"] = integer(H, &HbbtConfig::max_rounds);
    t["hbbt.patience"] = integer(H, &HbbtConfig::patience);
    t["hbbt.per_image_cap"] = integer(H, &HbbtConfig::per_image_cap);
    t["hbbt.eval_xi"] = real(H, &HbbtConfig::eval_xi);

    const auto C = &RunSettings::corpus;
    t["corpus.width"] = integer(C, &CorpusSpec::width);
    t["corpus.height"] = integer(C, &CorpusSpec::height);
    t["corpus.patients"] = integer(C, &CorpusSpec::patients);
    t["corpus.images_per_patient"] = integer(C, &CorpusSpec::images_per_patient);
    t["corpus.lesion_fraction"] = real(C, &CorpusSpec::lesion_fraction);
    t["corpus.lesions_per_image"] = integer(C, &CorpusSpec::lesions_per_image);
    t["corpus.lesion_radius_min"] = real(C, &CorpusSpec::lesion_radius_min);
    t["corpus.lesion_radius_max"] = real(C, &CorpusSpec::lesion_radius_max);
    t["corpus.fold_spacing_min"] = real(C, &CorpusSpec::fold_spacing_min);
    t["corpus.fold_spacing_max"] = real(C, &CorpusSpec::fold_spacing_max);
    t["corpus.fold_amplitude_min"] = real(C, &CorpusSpec::fold_amplitude_min);
    t["corpus.fold_amplitude_max"] = real(C, &CorpusSpec::fold_amplitude_max);
    t["corpus.base_intensity_min"] = real(C, &CorpusSpec::base_intensity_min);
    t["corpus.base_intensity_max"] = real(C, &CorpusSpec::base_intensity_max);
    t["corpus.distractors_min"] = integer(C, &CorpusSpec::distractors_min);
    t["corpus.distractors_max"] = integer(C, &CorpusSpec::distractors_max);
    t["corpus.noise_sigma"] = real(C, &CorpusSpec::noise_sigma);
    t["corpus.validation_patients"] = integer(C, &CorpusSpec::validation_patients);
    t["corpus.test_patients"] = integer(C, &CorpusSpec::test_patients);
    t["corpus.seed"] = integer(C, &CorpusSpec::seed);
    t["corpus.distractor_mix"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          const auto parts = split(v, ',');
          if (parts.size() != s.corpus.distractor_mix.size()) {
            throw ParseError(k + " needs " + std::to_string(kDistractorKindCount) + " weights");
          }
          for (std::size_t i = 0; i < parts.size(); ++i) {
            s.corpus.distractor_mix[i] = to_double(k, parts[i]);
          }
        },
        [](const RunSettings& s) {
          std::string out;
          for (double w : s.corpus.distractor_mix) {
            if (!out.empty()) out += ',';
            out += num(w);
          }
          return out;
        }};

    const auto E = &RunSettings::eval;
    t["eval.iou_threshold"] = real(E, &EvalSettings::iou_threshold);
    t["eval.target_recall"] = real(E, &EvalSettings::target_recall);
    t["eval.xi"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          if (v == "auto") s.eval.xi.reset();
          else s.eval.xi = to_double(k, v);
        },
        [](const RunSettings& s) { return s.eval.xi ? num(*s.eval.xi) : std::string("auto"); }};
    t["eval.folds"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          s.folds = to_int<int>(k, v);
        },
        [](const RunSettings& s) { return std::to_string(s.folds); }};
    t["seed"] = {
        [](RunSettings& s, const std::string& k, const std::string& v) {
          s.seed = to_int<std::uint64_t>(k, v);
        },
        [](const RunSettings& s) { return s.seed ? std::to_string(*s.seed) : std::string("none"); }};
    return t;
  }();
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value", line_no);
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key", line_no);
    if (!out.emplace(key, std::move(value)).second) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key " + key, line_no);
    }
  }
  return out;
}

RunSettings apply_key_values(const std::map<std::string, std::string>& entries, RunSettings base) {
  const auto& table = fields();
  for (const auto& [key, value] : entries) {
    const auto it = table.find(key);
    if (it == table.end()) throw ParseError("unknown config key: " + key);
    it->second.set(base, key, value);
  }
  base.augment.validate();
  base.detector.validate();
  base.hbbt.validate();
  base.corpus.validate();
  return base;
}

RunSettings load_settings(const std::filesystem::path& path, RunSettings base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return apply_key_values(parse_key_values(buf.str()), std::move(base));
}

std::string canonical_text(const RunSettings& settings) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(settings) + '\n';
  return out;
}

std::string config_hash(const RunSettings& settings) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_text(settings)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace foldaug::config

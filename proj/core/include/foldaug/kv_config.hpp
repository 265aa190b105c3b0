#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "foldaug/detector.hpp"
#include "foldaug/evalkit.hpp"
#include "foldaug/hbbt.hpp"
#include "foldaug/rsgaia.hpp"
#include "foldaug/synthgen.hpp"

namespace foldaug::config {

/// Every tunable of a run. Keys in a config file are `<section>.<field>`, e.g.
/// `augment.gamma = 4` or `detector.window_sizes = 40,60,90`.
struct RunSettings {
  rsgaia::AugmentConfig augment;
  detector::DetectorHyper detector;
  hbbt::HbbtConfig hbbt;
  synthgen::CorpusSpec corpus;
  evalkit::EvalSettings eval;
  int folds = 5;
  std::optional<std::uint64_t> seed;
};

/// `key = value` lines; `#` starts a comment; blank lines are skipped. Duplicate keys and
/// malformed lines raise ParseError carrying the 1-based line number.
std::map<std::string, std::string> parse_key_values(std::string_view text);

/// Applies entries over `base`. Unknown keys and unparsable values raise ParseError.
RunSettings apply_key_values(const std::map<std::string, std::string>& entries,
                             RunSettings base = {});

RunSettings load_settings(const std::filesystem::path& path, RunSettings base = {});

/// Every key with its current value, sorted by key, one `key = value` per line.
std::string canonical_text(const RunSettings& settings);

/// 16 hex digits of the FNV-1a hash of the canonical text.
std::string config_hash(const RunSettings& settings);

}  // namespace foldaug::config

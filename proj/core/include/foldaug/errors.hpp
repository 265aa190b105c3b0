#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace foldaug {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Image or field dimensions are invalid or do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// An argument lies outside its mathematical domain.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Malformed input file or record. `record()` is the offending index, or npos.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& what, std::size_t record = npos)
      : Error(what), record_(record) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t record() const noexcept { return record_; }

private:
  std::size_t record_;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Training could not proceed. `index()` names the offending annotation when known and
/// `round()` the hard-box round, or -1 outside the loop.
class TrainingError : public Error {
public:
  explicit TrainingError(const std::string& what, std::size_t index = npos, int round = -1)
      : Error(what), index_(index), round_(round) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index() const noexcept { return index_; }
  int round() const noexcept { return round_; }

private:
  std::size_t index_;
  int round_;
};

class InferenceError : public Error {
public:
  using Error::Error;
};

class SplitError : public Error {
public:
  using Error::Error;
};

}  // namespace foldaug

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace foldaug::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternalError = 3 };

/// Parses and runs one `foldaug` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Holds `<dir>/.foldaug.lock` for its lifetime. Throws IoError when another writer holds it.
class OutputLock {
public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

  static constexpr const char* kFileName = ".foldaug.lock";

private:
  std::filesystem::path path_;
};

}  // namespace foldaug::cli

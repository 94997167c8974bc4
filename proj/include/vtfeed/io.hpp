#pragma once

#include <cstdio>
#include <memory>
#include <string>

namespace vtfeed {

/// Line reader over a plain or gzip file (chosen by a `.gz` suffix). Strips trailing '\n' and '\r'.
class LineReader {
 public:
  explicit LineReader(const std::string& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  bool next(std::string& line);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::FILE* plain_ = nullptr;
  void* gz_ = nullptr;
  std::unique_ptr<char[]> buf_;
};

bool has_suffix(const std::string& s, const std::string& suffix);

}  // namespace vtfeed

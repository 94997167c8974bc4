#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vtfeed {

/// Base for every data error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedRecord : public Error {
 public:
  using Error::Error;
};

class MalformedRow : public Error {
 public:
  using Error::Error;
};

class InvalidDigest : public Error {
 public:
  using Error::Error;
};

class SortSpill : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class EmptyIntersection : public Error {
 public:
  using Error::Error;
};

class UnorderedHistory : public Error {
 public:
  using Error::Error;
};

class MissingScore : public Error {
 public:
  MissingScore(std::vector<std::string> hashes)
      : Error(describe(hashes)), hashes_(std::move(hashes)) {}

  const std::vector<std::string>& hashes() const noexcept { return hashes_; }

 private:
  static std::string describe(const std::vector<std::string>& hashes) {
    std::string msg = "missing vt_score for " + std::to_string(hashes.size()) + " sample(s)";
    for (std::size_t i = 0; i < hashes.size() && i < 5; ++i) msg += (i ? ", " : ": ") + hashes[i];
    if (hashes.size() > 5) msg += ", ...";
    return msg;
  }

  std::vector<std::string> hashes_;
};

}  // namespace vtfeed

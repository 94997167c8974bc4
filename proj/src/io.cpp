#include "vtfeed/io.hpp"

#include <zlib.h>

#include <cstring>

#include "vtfeed/error.hpp"

namespace vtfeed {

namespace {
constexpr int kBufSize = 1 << 16;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

LineReader::LineReader(const std::string& path) : path_(path), buf_(new char[kBufSize]) {
  if (has_suffix(path, ".gz")) {
    gz_ = gzopen(path.c_str(), "rb");
    if (!gz_) throw Error("cannot open " + path);
    gzbuffer(static_cast<gzFile>(gz_), 1 << 17);
  } else {
    plain_ = std::fopen(path.c_str(), "rb");
    if (!plain_) throw Error("cannot open " + path);
  }
}

LineReader::~LineReader() {
  if (gz_) gzclose(static_cast<gzFile>(gz_));
  if (plain_) std::fclose(plain_);
}

bool LineReader::next(std::string& line) {
  line.clear();
  bool any = false;
  while (true) {
    const char* got = gz_ ? gzgets(static_cast<gzFile>(gz_), buf_.get(), kBufSize)
                          : std::fgets(buf_.get(), kBufSize, plain_);
    if (!got) break;
    any = true;
    const std::size_t n = std::strlen(buf_.get());
    line.append(buf_.get(), n);
    if (n > 0 && buf_[n - 1] == '\n') break;
  }
  if (gz_) {
    int err = Z_OK;
    const char* msg = gzerror(static_cast<gzFile>(gz_), &err);
    if (err != Z_OK && err != Z_STREAM_END) throw Error(path_ + ": " + msg);
  } else if (std::ferror(plain_)) {
    throw Error("read error on " + path_);
  }
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  return any;
}

}  // namespace vtfeed

#include "vtfeed/external_sort.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <queue>
#include <system_error>

#include "vtfeed/error.hpp"
#include "vtfeed/io.hpp"
#include "vtfeed/kernels.hpp"

namespace vtfeed {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kBlockSize = std::size_t{1} << 20;
constexpr std::size_t kIoBuffer = std::size_t{1} << 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string_view nth_field(std::string_view line, std::size_t col, char sep, bool& ok) {
  std::size_t start = 0;
  for (std::size_t c = 0; c < col; ++c) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      ok = false;
      return {};
    }
    start = pos + 1;
  }
  const auto end = line.find(sep, start);
  ok = true;
  return line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
}

/// Buffered writer that reports failures as SortSpill.
class RunWriter {
 public:
  explicit RunWriter(const fs::path& path) : path_(path), f_(std::fopen(path.c_str(), "wb")) {
    if (!f_) throw SortSpill("cannot create sort run " + path.string() + ": " + std::strerror(errno));
    std::setvbuf(f_, nullptr, _IOFBF, kIoBuffer);
  }
  ~RunWriter() {
    if (f_) std::fclose(f_);
  }
  void write(std::string_view line) {
    if (std::fwrite(line.data(), 1, line.size(), f_) != line.size() || std::fputc('\n', f_) == EOF) fail();
  }
  void close() {
    const int rc = std::fclose(f_);
    f_ = nullptr;
    if (rc != 0) fail();
  }

 private:
  [[noreturn]] void fail() {
    throw SortSpill("write to sort run " + path_.string() + " failed: " + std::strerror(errno));
  }
  fs::path path_;
  std::FILE* f_;
};

}  // namespace

int LineOrder::compare(std::string_view a, std::string_view b) const {
  if (key_columns.empty()) return a.compare(b);
  for (auto col : key_columns) {
    bool ok_a = false, ok_b = false;
    const int c = nth_field(a, col, separator, ok_a).compare(nth_field(b, col, separator, ok_b));
    if (c != 0) return c;
  }
  return 0;
}

fs::path default_temp_dir() {
  if (const char* env = std::getenv("VTFEED_TMPDIR"); env && *env) return env;
  return fs::temp_directory_path();
}

struct ExternalSorter::Impl {
  SortOptions opts;
  fs::path dir;  // created lazily on first spill
  std::vector<std::unique_ptr<char[]>> blocks;
  std::size_t block_bytes = 0;  // total capacity of blocks
  std::size_t block_used = 0;   // bytes used in the last block
  std::size_t block_cap = 0;    // capacity of the last block
  std::vector<std::string_view> lines;
  std::vector<fs::path> runs;
  std::size_t next_run_id = 0;

  // Output state.
  bool finished = false;
  std::size_t cursor = 0;
  std::unique_ptr<LineReader> reader;
  std::string current;

  ~Impl() {
    if (!dir.empty()) {
      reader.reset();
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  }

  // Includes the scratch the sort of this chunk will need.
  std::size_t memory() const {
    return block_bytes + lines.capacity() * (sizeof(std::string_view) + kernels::kSortScratchPerLine);
  }

  void release_chunk() {
    lines.clear();
    lines.shrink_to_fit();
    blocks.clear();
    block_bytes = block_used = block_cap = 0;
  }

  fs::path new_run_path() {
    if (dir.empty()) {
      const fs::path base = opts.temp_dir.empty() ? default_temp_dir() : opts.temp_dir;
      std::string tmpl = (base / "vtfeed-sort-XXXXXX").string();
      if (!::mkdtemp(tmpl.data())) {
        throw SortSpill("cannot create temp dir under " + base.string() + ": " + std::strerror(errno));
      }
      dir = tmpl;
    }
    return dir / ("run-" + std::to_string(next_run_id++));
  }

  void spill(SortReport& report) {
    auto t0 = Clock::now();
    kernels::sort_lines(lines, opts.order, opts.exec);
    const auto path = new_run_path();
    RunWriter w(path);
    for (auto l : lines) w.write(l);
    w.close();
    runs.push_back(path);
    report.runs = runs.size();
    release_chunk();
    report.sort_seconds += seconds_since(t0);
  }

  char* reserve(std::size_t n, SortReport& report) {
    const bool needs_block = block_used + n > block_cap;
    const std::size_t new_block = needs_block ? std::max(std::min(kBlockSize, opts.memory_budget / 8), n) : 0;
    const std::size_t index_cap =
        lines.size() == lines.capacity() ? std::max<std::size_t>(16, 2 * lines.capacity()) : lines.capacity();
    const std::size_t projected =
        block_bytes + new_block + index_cap * (sizeof(std::string_view) + kernels::kSortScratchPerLine);
    if (!lines.empty() && projected > opts.memory_budget) {
      spill(report);
      return reserve(n, report);
    }
    if (needs_block) {
      blocks.emplace_back(new char[new_block]);
      block_bytes += new_block;
      block_cap = new_block;
      block_used = 0;
    }
    char* p = blocks.back().get() + block_used;
    block_used += n;
    return p;
  }

  void merge(const std::vector<fs::path>& inputs, const fs::path& output) {
    std::vector<std::unique_ptr<LineReader>> readers;
    std::vector<std::string> heads(inputs.size());
    for (const auto& p : inputs) readers.push_back(std::make_unique<LineReader>(p.string()));
    // Min-heap on (line, run index); the run index keeps the merge stable.
    auto greater = [&](std::size_t a, std::size_t b) {
      const int c = opts.order.compare(heads[a], heads[b]);
      return c != 0 ? c > 0 : a > b;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(greater)> heap(greater);
    for (std::size_t i = 0; i < readers.size(); ++i) {
      if (readers[i]->next(heads[i])) heap.push(i);
    }
    RunWriter w(output);
    while (!heap.empty()) {
      const auto i = heap.top();
      heap.pop();
      w.write(heads[i]);
      if (readers[i]->next(heads[i])) heap.push(i);
    }
    w.close();
    readers.clear();
    for (const auto& p : inputs) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
};

ExternalSorter::ExternalSorter(SortOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->opts = std::move(options);
  impl_->opts.max_fan_in = std::max<std::size_t>(impl_->opts.max_fan_in, 2);
}

ExternalSorter::~ExternalSorter() = default;

std::size_t ExternalSorter::memory_in_use() const noexcept { return impl_->memory(); }

void ExternalSorter::add(std::string_view line) {
  auto& im = *impl_;
  if (im.finished) throw std::logic_error("ExternalSorter::add after finish");
  for (auto col : im.opts.order.key_columns) {
    bool ok = false;
    nth_field(line, col, im.opts.order.separator, ok);
    if (!ok) throw MalformedRow("row lacks sort key column " + std::to_string(col));
  }
  char* dst = im.reserve(line.size(), report_);
  std::memcpy(dst, line.data(), line.size());
  // reserve() may have spilled; push after it so the view lands in the fresh chunk.
  im.lines.emplace_back(dst, line.size());
  ++report_.rows;
}

void ExternalSorter::finish() {
  auto& im = *impl_;
  if (im.finished) return;
  im.finished = true;
  if (im.runs.empty()) {
    auto t0 = Clock::now();
    kernels::sort_lines(im.lines, im.opts.order, im.opts.exec);
    report_.sort_seconds += seconds_since(t0);
    return;
  }
  if (!im.lines.empty()) im.spill(report_);
  im.release_chunk();

  auto t0 = Clock::now();
  std::vector<fs::path> pending = im.runs;
  while (pending.size() > 1) {
    std::vector<fs::path> next;
    for (std::size_t i = 0; i < pending.size(); i += im.opts.max_fan_in) {
      const auto end = std::min(pending.size(), i + im.opts.max_fan_in);
      std::vector<fs::path> group(pending.begin() + static_cast<std::ptrdiff_t>(i),
                                  pending.begin() + static_cast<std::ptrdiff_t>(end));
      if (group.size() == 1) {
        next.push_back(group.front());
        continue;
      }
      const auto out = im.new_run_path();
      im.merge(group, out);
      next.push_back(out);
    }
    pending = std::move(next);
  }
  report_.merge_seconds += seconds_since(t0);
  im.reader = std::make_unique<LineReader>(pending.front().string());
}

bool ExternalSorter::next(std::string_view& line) {
  auto& im = *impl_;
  if (!im.finished) throw std::logic_error("ExternalSorter::next before finish");
  if (im.reader) {
    if (!im.reader->next(im.current)) return false;
    line = im.current;
    return true;
  }
  if (im.cursor >= im.lines.size()) return false;
  line = im.lines[im.cursor++];
  return true;
}

SortReport external_sort(const std::string& input, const std::string& output, const SortOptions& options) {
  LineReader in(input);
  ExternalSorter sorter(options);
  std::vector<std::string> header;
  std::string line;
  bool in_header = true;
  while (in.next(line)) {
    if (in_header && !line.empty() && line.front() == '#') {
      header.push_back(line);
      continue;
    }
    in_header = false;
    sorter.add(line);
  }
  sorter.finish();

  const auto tmp = output + ".partial";
  {
    RunWriter w(tmp);
    for (const auto& h : header) w.write(h);
    std::string_view l;
    while (sorter.next(l)) w.write(l);
    w.close();
  }
  std::error_code ec;
  fs::rename(tmp, output, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("cannot move sorted output into place: " + output);
  }
  return sorter.report();
}

}  // namespace vtfeed

#include "vtfeed/clustering.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "vtfeed/error.hpp"
#include "vtfeed/io.hpp"
#include "vtfeed/kernels.hpp"
#include "vtfeed/text.hpp"
#include "vtfeed/union_find.hpp"
#include "vtfeed/vptree.hpp"

namespace vtfeed {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string_view to_string(SingletonReason r) {
  switch (r) {
    case SingletonReason::NullFeature:
      return "null-feature";
    case SingletonReason::UniqueValue:
      return "unique-value";
    case SingletonReason::None:
      break;
  }
  return "none";
}

std::optional<SingletonReason> singleton_reason_from(std::string_view s) {
  if (s == "none") return SingletonReason::None;
  if (s == "null-feature") return SingletonReason::NullFeature;
  if (s == "unique-value") return SingletonReason::UniqueValue;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Clustering

Clustering Clustering::from_clusters(std::vector<Cluster> clusters) {
  Clustering c;
  std::size_t total = 0;
  for (const auto& cl : clusters) total += cl.members.size();
  c.index_.reserve(total);
  for (std::size_t id = 0; id < clusters.size(); ++id) {
    if (clusters[id].members.empty()) throw Error("cluster " + std::to_string(id) + " is empty");
    for (const auto& m : clusters[id].members) {
      if (!c.index_.emplace(m, id).second) throw Error("sample " + m + " appears in more than one cluster");
    }
  }
  c.clusters_ = std::move(clusters);
  return c;
}

Clustering Clustering::canonical(std::vector<Cluster> clusters) {
  for (auto& cl : clusters) std::sort(cl.members.begin(), cl.members.end());
  std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.members.empty() || b.members.empty()) return a.members.size() < b.members.size();
    return a.members.front() < b.members.front();
  });
  return from_clusters(std::move(clusters));
}

std::optional<std::size_t> Clustering::cluster_of(std::string_view sha256) const {
  auto it = index_.find(std::string(sha256));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool same_partition(const Clustering& a, const Clustering& b) {
  if (a.size() != b.size() || a.sample_count() != b.sample_count()) return false;
  // Cluster ids must correspond one-to-one.
  std::vector<std::int64_t> map_ab(a.size(), -1);
  for (std::size_t id = 0; id < a.size(); ++id) {
    for (const auto& m : a.cluster(id).members) {
      auto other = b.cluster_of(m);
      if (!other) return false;
      if (map_ab[id] < 0) {
        map_ab[id] = static_cast<std::int64_t>(*other);
      } else if (map_ab[id] != static_cast<std::int64_t>(*other)) {
        return false;
      }
    }
    if (a.cluster(id).members.size() != b.cluster(static_cast<std::size_t>(map_ab[id])).members.size()) {
      return false;
    }
  }
  return true;
}

bool is_refinement(const Clustering& fine, const Clustering& coarse) {
  for (const auto& cl : fine.clusters()) {
    std::optional<std::size_t> target;
    for (const auto& m : cl.members) {
      auto other = coarse.cluster_of(m);
      if (!other || (target && *target != *other)) return false;
      target = other;
    }
  }
  return true;
}

void write_cluster_file(std::ostream& out, const Clustering& c) {
  std::string line;
  for (std::size_t id = 0; id < c.size(); ++id) {
    const auto& cl = c.cluster(id);
    std::vector<std::string_view> members(cl.members.begin(), cl.members.end());
    std::sort(members.begin(), members.end());
    const auto reason = to_string(cl.reason);
    for (auto m : members) {
      line.clear();
      line += std::to_string(id);
      line += '\t';
      line += m;
      line += '\t';
      line += reason;
      line += '\n';
      out << line;
    }
  }
}

Clustering read_cluster_file(std::istream& in) {
  std::vector<Cluster> clusters;
  std::string line;
  std::optional<std::string> last_id;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cols = text::split(line, '\t');
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      throw MalformedRow("cluster file line " + std::to_string(lineno) + ": expected id<TAB>sha256<TAB>reason");
    }
    auto reason = singleton_reason_from(cols[2]);
    if (!reason) throw MalformedRow("cluster file line " + std::to_string(lineno) + ": bad singleton reason");
    if (!last_id || *last_id != cols[0]) {
      clusters.emplace_back();
      clusters.back().reason = *reason;
      last_id = std::string(cols[0]);
    }
    clusters.back().members.emplace_back(cols[1]);
  }
  try {
    return Clustering::from_clusters(std::move(clusters));
  } catch (const Error& e) {
    throw MalformedRow(std::string("cluster file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// FVG

namespace {

constexpr std::int64_t kDateBias = std::int64_t{1} << 62;

/// Fixed-width key that sorts later timestamps first.
std::string descending_date_key(Timestamp t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%019" PRId64, kDateBias - t);
  return buf;
}

bool has_separator(std::string_view s) { return s.find_first_of("\t\n") != std::string_view::npos; }

/// Two-pass FVG: pass 1 keeps one row per sample, pass 2 orders by (value, sha256) so that each
/// run of equal values is one cluster. `emit(cluster_rows, is_null)` receives runs in order.
class FvgPipeline {
 public:
  explicit FvgPipeline(const SortOptions& options) : pass1_(half(options, {})), pass2_(half(options, {})) {}

  void add(std::optional<std::string_view> value, std::string_view sha256, Timestamp scan_date) {
    if (sha256.empty() || has_separator(sha256)) throw MalformedRow("bad sample hash in FVG input");
    if (value && has_separator(*value)) throw MalformedRow("FVG feature value contains a tab or newline");
    line_.clear();
    line_ += sha256;
    line_ += '\t';
    line_ += descending_date_key(scan_date);
    line_ += value ? "\t0\t" : "\t1\t";
    if (value) line_ += *value;
    pass1_.add(line_);
    ++report_.rows;
  }

  template <typename Emit>
  FvgReport run(Emit&& emit) {
    auto t0 = Clock::now();
    pass1_.finish();
    std::string_view row;
    std::string prev_sha;
    while (pass1_.next(row)) {
      const auto tab = row.find('\t');
      const auto sha = row.substr(0, tab);
      if (sha == prev_sha) continue;  // first row per sample is the winner
      prev_sha = std::string(sha);
      const auto rest = row.substr(tab + 1 + 19 + 1);  // skip the date key
      // rest = flag '\t' value
      line_.clear();
      line_ += rest.substr(0, 1);
      line_ += '\t';
      line_ += rest.substr(2);
      line_ += '\t';
      line_ += sha;
      pass2_.add(line_);
      ++report_.samples;
    }
    pass2_.finish();
    report_.sort_seconds = seconds_since(t0);
    report_.runs = pass1_.report().runs + pass2_.report().runs;

    t0 = Clock::now();
    std::vector<std::string> members;
    std::string current_value;
    bool open = false;
    auto close = [&] {
      if (open) {
        emit(members, false);
        ++report_.clusters;
      }
      members.clear();
      open = false;
    };
    while (pass2_.next(row)) {
      const bool is_null = row.front() == '1';
      const auto last_tab = row.rfind('\t');
      const auto value = row.substr(2, last_tab - 2);
      const auto sha = row.substr(last_tab + 1);
      if (is_null) {
        close();
        members.assign(1, std::string(sha));
        emit(members, true);
        members.clear();
        ++report_.clusters;
        ++report_.null_singletons;
        continue;
      }
      if (!open || value != current_value) {
        close();
        current_value = std::string(value);
        open = true;
      }
      members.emplace_back(sha);
    }
    close();
    report_.group_seconds = seconds_since(t0);
    return report_;
  }

 private:
  static SortOptions half(SortOptions o, LineOrder order) {
    o.memory_budget = std::max<std::size_t>(o.memory_budget / 2, 1);
    o.order = std::move(order);
    return o;
  }

  ExternalSorter pass1_;
  ExternalSorter pass2_;
  std::string line_;
  FvgReport report_;
};

}  // namespace

Clustering fvg_cluster(std::span<const FvgRow> rows, const SortOptions& options, FvgReport* report) {
  FvgPipeline pipeline(options);
  for (const auto& r : rows) {
    pipeline.add(r.value ? std::optional<std::string_view>(*r.value) : std::nullopt, r.sha256, r.scan_date);
  }
  std::vector<Cluster> clusters;
  auto rep = pipeline.run([&](const std::vector<std::string>& members, bool is_null) {
    Cluster c;
    c.members = members;
    if (is_null) {
      c.reason = SingletonReason::NullFeature;
    } else if (members.size() == 1) {
      c.reason = SingletonReason::UniqueValue;
    }
    clusters.push_back(std::move(c));
  });
  if (report) *report = rep;
  // Runs arrive in value order with sorted members, the same ids fvg_cluster_file writes.
  return Clustering::from_clusters(std::move(clusters));
}

FvgReport fvg_cluster_file(const std::string& feature_file, std::string_view feature,
                           const std::string& cluster_file, const SortOptions& options) {
  const std::size_t col = feature_column(feature);
  if (col < feature_column("filetype")) {
    throw std::invalid_argument("'" + std::string(feature) + "' is not a clusterable feature");
  }
  FvgPipeline pipeline(options);
  {
    LineReader in(feature_file);
    std::string line;
    if (!in.next(line) || text::trim(line) != kFeatureFileHeader) {
      throw MalformedRow(feature_file + ": missing " + std::string(kFeatureFileHeader) + " header");
    }
    std::size_t lineno = 1;
    while (in.next(line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto cols = text::split(line, '\t');
      if (cols.size() <= col) throw MalformedRow(feature_file + ":" + std::to_string(lineno) + ": too few columns");
      auto date = text::parse_int(cols[1]);
      if (!date) throw MalformedRow(feature_file + ":" + std::to_string(lineno) + ": bad scan_date");
      pipeline.add(cols[col].empty() ? std::nullopt : std::optional<std::string_view>(cols[col]), cols[0], *date);
    }
  }

  const auto partial = cluster_file + ".partial";
  std::FILE* out = std::fopen(partial.c_str(), "wb");
  if (!out) throw Error("cannot write " + cluster_file);
  std::setvbuf(out, nullptr, _IOFBF, 1 << 20);
  std::size_t id = 0;
  bool failed = false;
  FvgReport rep;
  try {
    rep = pipeline.run([&](const std::vector<std::string>& members, bool is_null) {
      const char* reason = is_null ? "null-feature" : members.size() == 1 ? "unique-value" : "none";
      for (const auto& m : members) {
        if (std::fprintf(out, "%zu\t%s\t%s\n", id, m.c_str(), reason) < 0) failed = true;
      }
      ++id;
    });
  } catch (...) {
    std::fclose(out);
    std::remove(partial.c_str());
    throw;
  }
  if (std::fclose(out) != 0 || failed || std::rename(partial.c_str(), cluster_file.c_str()) != 0) {
    std::remove(partial.c_str());
    throw Error("failed writing " + cluster_file);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// HAC-T

namespace {

std::vector<Cluster> clusters_from_edges(std::size_t n, const std::vector<kernels::Edge>& edges,
                                         const std::vector<const std::string*>& names) {
  UnionFind uf(n);
  for (const auto& [a, b] : edges) uf.unite(a, b);
  std::vector<Cluster> out;
  for (auto& group : uf.groups()) {
    Cluster c;
    c.members.reserve(group.size());
    for (auto i : group) c.members.push_back(*names[i]);
    if (group.size() == 1) c.reason = SingletonReason::UniqueValue;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

Clustering hact_cluster(std::span<const HactInput> samples, int cdist, bool exact, std::uint64_t seed, Exec exec) {
  std::vector<tlsh::Digest> digests;
  std::vector<const std::string*> names;
  std::vector<Cluster> clusters;
  for (const auto& s : samples) {
    if (s.digest) {
      digests.push_back(*s.digest);
      names.push_back(&s.sha256);
    } else {
      clusters.push_back({{s.sha256}, SingletonReason::NullFeature});
    }
  }
  const auto n = digests.size();
  const auto tree = VPTree::build(std::move(digests), seed);
  const auto edges = kernels::hact_spanning_edges(tree, cdist, exact, exec);
  for (auto& c : clusters_from_edges(n, edges, names)) clusters.push_back(std::move(c));
  return Clustering::canonical(std::move(clusters));
}

// ---------------------------------------------------------------------------
// HAC

DistanceSpec DistanceSpec::for_features(std::span<const std::string> names, double threshold) {
  DistanceSpec spec;
  spec.threshold = threshold;
  const auto known = feature_names();
  for (const auto& n : names) {
    if (std::find(known.begin(), known.end(), n) == known.end()) {
      throw std::invalid_argument("unknown feature '" + n + "'");
    }
    spec.features.push_back({n, n == "tlsh" ? FeatureKind::Tlsh : FeatureKind::Equality});
  }
  return spec;
}

double pairwise_distance(const SampleFeatures& a, const SampleFeatures& b, const DistanceSpec& spec) {
  double sum = 0;
  int present = 0;
  for (const auto& f : spec.features) {
    const auto& va = feature_value(a, f.name);
    const auto& vb = feature_value(b, f.name);
    if (!va || !vb) continue;
    ++present;
    if (f.kind == FeatureKind::Tlsh) {
      sum += tlsh::normalized_distance(tlsh::parse_digest(*va), tlsh::parse_digest(*vb));
    } else {
      sum += *va == *vb ? 0.0 : 1.0;
    }
  }
  return present == 0 ? 1.0 : sum / present;
}

Clustering hac_cluster(std::span<const SampleFeatures> samples, const DistanceSpec& spec, std::size_t limit,
                       Exec exec) {
  if (spec.features.empty()) throw std::invalid_argument("HAC needs at least one feature");
  if (samples.size() > limit) {
    throw TooLarge("HAC needs O(n^2) comparisons; " + std::to_string(samples.size()) +
                   " samples exceed the limit of " + std::to_string(limit) +
                   ". Use HAC-T (cluster hact) or FVG (cluster fvg) for large inputs.");
  }
  const auto matrix = kernels::HacMatrix::build(samples, spec);
  const auto edges = kernels::hac_spanning_edges(matrix, spec.threshold, exec);
  std::vector<const std::string*> names;
  names.reserve(samples.size());
  for (const auto& s : samples) names.push_back(&s.sha256);
  auto clusters = clusters_from_edges(samples.size(), edges, names);
  // Singletons without any usable feature.
  std::unordered_map<std::string_view, std::size_t> pos;
  for (std::size_t i = 0; i < samples.size(); ++i) pos.emplace(samples[i].sha256, i);
  for (auto& c : clusters) {
    if (c.members.size() == 1 && matrix.all_null(pos.at(c.members.front()))) c.reason = SingletonReason::NullFeature;
  }
  return Clustering::canonical(std::move(clusters));
}

}  // namespace vtfeed

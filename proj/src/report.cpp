#include "vtfeed/report.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "embedded_data.hpp"
#include "vtfeed/error.hpp"
#include "vtfeed/text.hpp"

namespace vtfeed {

using json = nlohmann::json;

namespace {

constexpr int kMaxVtScore = 200;

[[noreturn]] void malformed(const std::string& why) { throw MalformedRecord(why); }

const json* member(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::optional<std::string> opt_text(const json& obj, const char* key) {
  const json* v = member(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_string()) malformed(std::string(key) + " must be a string");
  return text::clean_field(v->get_ref<const std::string&>());
}

/// Optional hex field; `len` 0 means any positive length.
std::optional<std::string> opt_hex(const json& obj, const char* key, std::size_t len = 0) {
  auto v = opt_text(obj, key);
  if (!v) return v;
  if (!text::is_hex(*v) || (len && v->size() != len)) malformed(std::string("bad hex in ") + key);
  return text::to_lower(*v);
}

Timestamp req_time(const json& obj, const char* key) {
  const json* v = member(obj, key);
  if (!v || !v->is_number_integer()) malformed(std::string("missing or non-integer ") + key);
  return v->get<Timestamp>();
}

std::optional<Timestamp> opt_time(const json& obj, const char* key) {
  const json* v = member(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_number_integer()) malformed(std::string(key) + " must be an integer");
  return v->get<Timestamp>();
}

void put(json& obj, const char* key, const std::optional<std::string>& v) {
  if (v) obj[key] = *v;
}

}  // namespace

ReportRecord parse_report_line(std::string_view line) {
  json obj = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) malformed("not a JSON object");

  ReportRecord r;
  const json* sha = member(obj, "sha256");
  if (!sha || !sha->is_string()) malformed("missing sha256");
  r.sha256 = sha->get<std::string>();
  if (r.sha256.size() != 64 || !text::is_hex(r.sha256) || r.sha256 != text::to_lower(r.sha256)) {
    malformed("sha256 must be 64 lowercase hex chars");
  }
  r.sha1 = opt_hex(obj, "sha1", 40).value_or("");
  r.md5 = opt_hex(obj, "md5", 32).value_or("");

  r.scan_date = req_time(obj, "scan_date");
  r.fseen_date = req_time(obj, "fseen_date");
  if (r.fseen_date > r.scan_date) malformed("fseen_date after scan_date");

  const json* score = member(obj, "vt_score");
  if (!score || !score->is_number_integer()) malformed("missing vt_score");
  const auto s = score->get<std::int64_t>();
  if (s < 0 || s > kMaxVtScore) malformed("vt_score out of range");
  r.vt_score = static_cast<int>(s);

  if (const json* dets = member(obj, "detection_labels")) {
    if (!dets->is_object()) malformed("detection_labels must be an object");
    r.detection_labels.reserve(dets->size());
    for (const auto& [engine, label] : dets->items()) {
      if (label.is_null()) {
        r.detection_labels.push_back({engine, std::nullopt});
      } else if (label.is_string()) {
        r.detection_labels.push_back({engine, label.get<std::string>()});
      } else {
        malformed("detection label for " + engine + " must be a string or null");
      }
    }
  }

  r.trid_file_type = opt_text(obj, "trid_file_type");
  if (const json* tags = member(obj, "vt_tags")) {
    if (!tags->is_array()) malformed("vt_tags must be an array");
    for (const auto& t : *tags) {
      if (!t.is_string()) malformed("vt_tags entries must be strings");
      if (auto v = text::clean_field(t.get_ref<const std::string&>())) r.vt_tags.push_back(std::move(*v));
    }
  }
  r.vt_meaningful_name = opt_text(obj, "vt_meaningful_name");

  r.tlsh = opt_text(obj, "tlsh");
  if (r.tlsh && (*r.tlsh == "TNULL" || *r.tlsh == "tnull")) r.tlsh.reset();
  if (r.tlsh) {
    std::string_view body = *r.tlsh;
    if (body.size() >= 2 && (body[0] == 'T' || body[0] == 't') && body[1] == '1') body.remove_prefix(2);
    if (!text::is_hex(body)) malformed("bad hex in tlsh");
  }
  r.vhash = opt_text(obj, "vhash");
  r.imphash = opt_hex(obj, "imphash", 32);
  r.richpe_hash = opt_hex(obj, "richpe_hash");
  r.authentihash = opt_hex(obj, "authentihash", 64);
  r.icon_hash = opt_hex(obj, "icon_hash");

  r.cert_thumbprint = opt_hex(obj, "cert_thumbprint");
  r.cert_subject = opt_text(obj, "cert_subject");
  r.cert_issuer = opt_text(obj, "cert_issuer");
  r.cert_valid_from = opt_time(obj, "cert_valid_from");
  r.cert_valid_to = opt_time(obj, "cert_valid_to");
  r.sig_verification_res = opt_text(obj, "sig_verification_res");
  r.package_name = opt_text(obj, "package_name");
  return r;
}

std::string format_report_line(const ReportRecord& r) {
  json obj = json::object();
  obj["sha256"] = r.sha256;
  if (!r.sha1.empty()) obj["sha1"] = r.sha1;
  if (!r.md5.empty()) obj["md5"] = r.md5;
  obj["scan_date"] = r.scan_date;
  obj["fseen_date"] = r.fseen_date;
  obj["vt_score"] = r.vt_score;
  json dets = json::object();
  for (const auto& d : r.detection_labels) {
    dets[d.engine] = d.label ? json(*d.label) : json(nullptr);
  }
  obj["detection_labels"] = std::move(dets);
  put(obj, "trid_file_type", r.trid_file_type);
  if (!r.vt_tags.empty()) obj["vt_tags"] = r.vt_tags;
  put(obj, "vt_meaningful_name", r.vt_meaningful_name);
  put(obj, "tlsh", r.tlsh);
  put(obj, "vhash", r.vhash);
  put(obj, "imphash", r.imphash);
  put(obj, "richpe_hash", r.richpe_hash);
  put(obj, "authentihash", r.authentihash);
  put(obj, "icon_hash", r.icon_hash);
  put(obj, "cert_thumbprint", r.cert_thumbprint);
  put(obj, "cert_subject", r.cert_subject);
  put(obj, "cert_issuer", r.cert_issuer);
  if (r.cert_valid_from) obj["cert_valid_from"] = *r.cert_valid_from;
  if (r.cert_valid_to) obj["cert_valid_to"] = *r.cert_valid_to;
  put(obj, "sig_verification_res", r.sig_verification_res);
  put(obj, "package_name", r.package_name);
  return obj.dump();
}

// ---------------------------------------------------------------------------
// Filetype

FiletypeMapping FiletypeMapping::parse(std::istream& in) {
  FiletypeMapping m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cols = text::split(body, '\t');
    if (cols.size() != 3) {
      throw Error("filetype mapping line " + std::to_string(lineno) + ": expected kind<TAB>key<TAB>canonical");
    }
    Rule rule{text::to_lower(text::trim(cols[1])), std::string(text::trim(cols[2]))};
    if (rule.key.empty() || rule.canonical.empty()) {
      throw Error("filetype mapping line " + std::to_string(lineno) + ": empty key or canonical");
    }
    const auto kind = text::trim(cols[0]);
    if (kind == "trid") {
      m.trid_.push_back(std::move(rule));
    } else if (kind == "tag") {
      m.tags_.push_back(std::move(rule));
    } else if (kind == "ext") {
      m.exts_.push_back(std::move(rule));
    } else {
      throw Error("filetype mapping line " + std::to_string(lineno) + ": unknown kind '" + std::string(kind) + "'");
    }
  }
  return m;
}

FiletypeMapping FiletypeMapping::defaults() {
  std::istringstream in{std::string(embedded::kFiletypeMapping)};
  return parse(in);
}

FiletypeMapping FiletypeMapping::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open filetype mapping " + path);
  return parse(in);
}

std::optional<std::string> FiletypeMapping::from_trid(std::string_view trid) const {
  const std::string lc = text::to_lower(trid);
  const Rule* best = nullptr;
  for (const auto& rule : trid_) {
    if (lc.find(rule.key) != std::string::npos && (!best || rule.key.size() > best->key.size())) best = &rule;
  }
  if (!best) return std::nullopt;
  return best->canonical;
}

std::optional<std::string> FiletypeMapping::from_tags(std::span<const std::string> tags) const {
  for (const auto& rule : tags_) {
    for (const auto& tag : tags) {
      if (text::to_lower(tag) == rule.key) return rule.canonical;
    }
  }
  return std::nullopt;
}

std::optional<std::string> FiletypeMapping::from_name(std::string_view name) const {
  const auto dot = name.rfind('.');
  if (dot == std::string_view::npos || dot + 1 == name.size()) return std::nullopt;
  const std::string ext = text::to_lower(text::trim(name.substr(dot + 1)));
  for (const auto& rule : exts_) {
    if (rule.key == ext) return rule.canonical;
  }
  return std::nullopt;
}

std::optional<std::string> derive_filetype(const std::optional<std::string>& trid,
                                           std::span<const std::string> tags,
                                           const std::optional<std::string>& name,
                                           const FiletypeMapping& mapping) {
  // Votes in priority order.
  const std::array<std::optional<std::string>, 3> votes = {
      trid ? mapping.from_trid(*trid) : std::nullopt,
      mapping.from_tags(tags),
      name ? mapping.from_name(*name) : std::nullopt,
  };
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (!votes[i]) continue;
    for (std::size_t j = i + 1; j < votes.size(); ++j) {
      if (votes[j] == votes[i]) return votes[i];
    }
  }
  for (const auto& v : votes) {
    if (v) return v;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Features

int SampleFeatures::feature_count() const noexcept {
  int n = 0;
  for (const auto* f : {&filetype, &family, &tlsh, &vhash, &imphash, &richpe_hash, &authentihash,
                        &icon_hash, &cert_thumbprint, &package_name}) {
    n += f->has_value();
  }
  return n + is_pup.has_value();
}

namespace {
constexpr std::array<std::string_view, 10> kFeatureNames = {
    "filetype", "family", "tlsh", "vhash", "imphash", "richpe_hash",
    "authentihash", "icon_hash", "cert_thumbprint", "package_name",
};

constexpr std::array<std::string_view, 16> kColumns = {
    "sha256",   "scan_date",  "fseen_date",   "vt_score",  "is_new",          "filetype",
    "family",   "is_pup",     "tlsh",         "vhash",     "imphash",         "richpe_hash",
    "authentihash", "icon_hash", "cert_thumbprint", "package_name",
};

std::optional<std::string> lower_opt(const std::optional<std::string>& v) {
  if (!v) return v;
  return text::to_lower(*v);
}
}  // namespace

std::span<const std::string_view> feature_names() { return kFeatureNames; }

const std::optional<std::string>& feature_value(const SampleFeatures& s, std::string_view name) {
  if (name == "filetype") return s.filetype;
  if (name == "family") return s.family;
  if (name == "tlsh") return s.tlsh;
  if (name == "vhash") return s.vhash;
  if (name == "imphash") return s.imphash;
  if (name == "richpe_hash") return s.richpe_hash;
  if (name == "authentihash") return s.authentihash;
  if (name == "icon_hash") return s.icon_hash;
  if (name == "cert_thumbprint") return s.cert_thumbprint;
  if (name == "package_name") return s.package_name;
  throw std::invalid_argument("unknown feature '" + std::string(name) + "'");
}

std::size_t feature_column(std::string_view name) {
  auto it = std::find(kColumns.begin(), kColumns.end(), name);
  if (it == kColumns.end()) throw std::invalid_argument("unknown feature column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - kColumns.begin());
}

SampleFeatures extract_features(const ReportRecord& report, const LabelResult* label,
                                const TimeWindow& window, const FiletypeMapping& mapping) {
  SampleFeatures s;
  s.sha256 = report.sha256;
  s.scan_date = report.scan_date;
  s.fseen_date = report.fseen_date;
  s.vt_score = report.vt_score;
  s.filetype = derive_filetype(report.trid_file_type, report.vt_tags, report.vt_meaningful_name, mapping);
  if (label) {
    s.family = label->family;
    s.is_pup = label->is_pup;
  }
  s.tlsh = lower_opt(report.tlsh);
  s.vhash = report.vhash;
  s.imphash = lower_opt(report.imphash);
  s.richpe_hash = lower_opt(report.richpe_hash);
  s.authentihash = lower_opt(report.authentihash);
  s.icon_hash = lower_opt(report.icon_hash);
  s.cert_thumbprint = lower_opt(report.cert_thumbprint);
  s.package_name = report.package_name;
  s.is_new = window.contains(report.fseen_date);
  return s;
}

namespace {

template <typename Better>
std::vector<SampleFeatures> reduce_by_sample(std::span<const SampleFeatures> rows, Better better,
                                             bool only_new) {
  std::unordered_map<std::string_view, std::size_t> best;
  best.reserve(rows.size());
  std::vector<std::size_t> order;  // first-seen order of distinct samples
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (only_new && !rows[i].is_new) continue;
    auto [it, inserted] = best.try_emplace(rows[i].sha256, i);
    if (inserted) {
      order.push_back(i);
    } else if (better(rows[i], rows[it->second])) {
      it->second = i;
    }
  }
  std::vector<SampleFeatures> out;
  out.reserve(order.size());
  for (auto first : order) out.push_back(rows[best.at(rows[first].sha256)]);
  return out;
}

}  // namespace

std::vector<SampleFeatures> dedup_latest(std::span<const SampleFeatures> rows) {
  return reduce_by_sample(
      rows,
      [](const SampleFeatures& a, const SampleFeatures& b) {
        if (a.scan_date != b.scan_date) return a.scan_date > b.scan_date;
        return a.feature_count() > b.feature_count();
      },
      false);
}

std::vector<SampleFeatures> first_reports(std::span<const SampleFeatures> rows) {
  return reduce_by_sample(
      rows,
      [](const SampleFeatures& a, const SampleFeatures& b) {
        if (a.scan_date != b.scan_date) return a.scan_date < b.scan_date;
        return a.feature_count() > b.feature_count();
      },
      true);
}

// ---------------------------------------------------------------------------
// Feature file

std::string format_feature_row(const SampleFeatures& s) {
  std::string out;
  out.reserve(256);
  auto field = [&](std::string_view v) {
    out += '\t';
    out += v;
  };
  auto opt = [&](const std::optional<std::string>& v) { field(v ? std::string_view(*v) : std::string_view{}); };
  out += s.sha256;
  field(std::to_string(s.scan_date));
  field(std::to_string(s.fseen_date));
  field(std::to_string(s.vt_score));
  field(s.is_new ? "1" : "0");
  opt(s.filetype);
  opt(s.family);
  field(s.is_pup ? (*s.is_pup ? "1" : "0") : "");
  opt(s.tlsh);
  opt(s.vhash);
  opt(s.imphash);
  opt(s.richpe_hash);
  opt(s.authentihash);
  opt(s.icon_hash);
  opt(s.cert_thumbprint);
  opt(s.package_name);
  return out;
}

SampleFeatures parse_feature_row(std::string_view line) {
  const auto cols = text::split(line, '\t');
  if (cols.size() != kColumns.size()) {
    throw MalformedRow("feature row has " + std::to_string(cols.size()) + " columns, expected " +
                       std::to_string(kColumns.size()));
  }
  auto num = [&](std::size_t i) {
    auto v = text::parse_int(cols[i]);
    if (!v) throw MalformedRow("bad integer in column " + std::string(kColumns[i]));
    return *v;
  };
  auto opt = [&](std::size_t i) -> std::optional<std::string> {
    if (cols[i].empty()) return std::nullopt;
    return std::string(cols[i]);
  };
  SampleFeatures s;
  s.sha256 = std::string(cols[0]);
  if (s.sha256.size() != 64 || !text::is_hex(s.sha256)) throw MalformedRow("bad sha256 in feature row");
  s.scan_date = num(1);
  s.fseen_date = num(2);
  s.vt_score = static_cast<int>(num(3));
  if (cols[4] != "0" && cols[4] != "1") throw MalformedRow("is_new must be 0 or 1");
  s.is_new = cols[4] == "1";
  s.filetype = opt(5);
  s.family = opt(6);
  if (!cols[7].empty()) {
    if (cols[7] != "0" && cols[7] != "1") throw MalformedRow("is_pup must be 0, 1 or empty");
    s.is_pup = cols[7] == "1";
  }
  s.tlsh = opt(8);
  s.vhash = opt(9);
  s.imphash = opt(10);
  s.richpe_hash = opt(11);
  s.authentihash = opt(12);
  s.icon_hash = opt(13);
  s.cert_thumbprint = opt(14);
  s.package_name = opt(15);
  return s;
}

void write_feature_file(std::ostream& out, std::span<const SampleFeatures> rows) {
  out << kFeatureFileHeader << '\n';
  for (const auto& r : rows) out << format_feature_row(r) << '\n';
}

std::vector<SampleFeatures> read_feature_file(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kFeatureFileHeader) {
    throw MalformedRow("feature file must start with " + std::string(kFeatureFileHeader));
  }
  std::vector<SampleFeatures> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(parse_feature_row(line));
  }
  return rows;
}

}  // namespace vtfeed

#include "vtfeed/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vtfeed/error.hpp"
#include "vtfeed/feed_stats.hpp"

namespace vtfeed {

using json = nlohmann::json;

namespace {

Timestamp time_value(const json& v, const char* what) {
  if (v.is_number_integer()) return v.get<Timestamp>();
  if (v.is_string()) {
    if (auto t = parse_time(v.get<std::string>())) return *t;
  }
  throw Error(std::string("config: ") + what + " must be an epoch integer or YYYY-MM-DD");
}

TimeWindow interval(const json& v, const char* what) {
  if (!v.is_object() || !v.contains("start") || !v.contains("end")) {
    throw Error(std::string("config: ") + what + " needs start and end");
  }
  return {time_value(v["start"], what), time_value(v["end"], what)};
}

}  // namespace

void PipelineConfig::validate() const {
  if (window.start >= window.end) throw Error("config: window start must precede end");
  for (const auto& g : gaps) {
    if (g.start >= g.end) throw Error("config: gap start must precede end");
  }
  if (memory_budget < kMinMemoryBudget) throw Error("config: memory budget must be at least 64 MiB");
  if (low_threshold < 0 || high_threshold < 0 || fud_threshold < 0 || cdist < 0 || hac_threshold < 0 ||
      grace_seconds < 0) {
    throw Error("config: thresholds must be non-negative");
  }
}

void PipelineConfig::merge_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error("config: top level must be an object");
  try {
    if (doc.contains("window")) window = interval(doc["window"], "window");
    if (doc.contains("gaps")) {
      gaps.clear();
      for (const auto& g : doc["gaps"]) gaps.push_back(interval(g, "gap"));
    }
    if (doc.contains("memory_budget_mib")) memory_budget = doc["memory_budget_mib"].get<std::size_t>() << 20;
    if (doc.contains("temp_dir")) temp_dir = doc["temp_dir"].get<std::string>();
    if (doc.contains("seed")) seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("taxonomy")) taxonomy_path = doc["taxonomy"].get<std::string>();
    if (doc.contains("aliases")) alias_path = doc["aliases"].get<std::string>();
    if (doc.contains("filetype_mapping")) filetype_mapping_path = doc["filetype_mapping"].get<std::string>();
    if (doc.contains("low_threshold")) low_threshold = doc["low_threshold"].get<int>();
    if (doc.contains("high_threshold")) high_threshold = doc["high_threshold"].get<int>();
    if (doc.contains("cdist")) cdist = doc["cdist"].get<int>();
    if (doc.contains("hac_threshold")) hac_threshold = doc["hac_threshold"].get<double>();
    if (doc.contains("hac_limit")) hac_limit = doc["hac_limit"].get<std::size_t>();
    if (doc.contains("fud_threshold")) fud_threshold = doc["fud_threshold"].get<int>();
    if (doc.contains("grace_seconds")) grace_seconds = doc["grace_seconds"].get<Timestamp>();
    if (doc.contains("threads")) threads = doc["threads"].get<int>();
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig c;
  c.merge_json(ss.str());
  return c;
}

}  // namespace vtfeed

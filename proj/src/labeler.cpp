#include "vtfeed/labeler.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "embedded_data.hpp"
#include "vtfeed/error.hpp"
#include "vtfeed/text.hpp"

namespace vtfeed {

namespace {

constexpr std::size_t kMinTokenLength = 4;

template <typename Fn>
void for_each_rule(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cols = text::split(body, '\t');
    if (cols.size() != 2 || text::trim(cols[0]).empty() || text::trim(cols[1]).empty()) {
      throw Error("taxonomy line " + std::to_string(lineno) + ": expected two tab-separated columns");
    }
    fn(text::to_lower(text::trim(cols[0])), std::string(text::trim(cols[1])));
  }
}

bool is_all_digits_or_hex(std::string_view tok) {
  return std::all_of(tok.begin(), tok.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

bool is_pup_category(std::string_view category) {
  return category == "CLASS:pup" || category.starts_with("CLASS:pup:");
}

}  // namespace

Taxonomy Taxonomy::parse(std::istream& categories, std::istream& aliases) {
  Taxonomy t;
  for_each_rule(categories, [&](std::string token, std::string category) {
    if (category == "NOISE") {
      t.noise_.insert(std::move(token));
    } else if (category == "FAM") {
      t.families_.insert(std::move(token));
    } else {
      t.categories_[std::move(token)] = std::move(category);
    }
  });
  for_each_rule(aliases, [&](std::string alias, std::string canonical) {
    canonical = text::to_lower(canonical);
    t.families_.insert(canonical);
    t.aliases_[std::move(alias)] = std::move(canonical);
  });
  for (const auto& [alias, target] : t.aliases_) {
    if (t.aliases_.contains(target)) {
      throw Error("alias target '" + target + "' (from '" + alias + "') is itself an alias");
    }
  }
  return t;
}

Taxonomy Taxonomy::defaults() {
  std::istringstream cats{std::string(embedded::kTaxonomy)};
  std::istringstream aliases{std::string(embedded::kAliases)};
  return parse(cats, aliases);
}

Taxonomy Taxonomy::load(const std::string& category_path, const std::string& alias_path) {
  std::ifstream cats(category_path);
  if (!cats) throw Error("cannot open taxonomy file " + category_path);
  std::ifstream aliases(alias_path);
  if (!aliases) throw Error("cannot open alias file " + alias_path);
  return parse(cats, aliases);
}

bool Taxonomy::is_noise(std::string_view token) const { return noise_.contains(std::string(token)); }

const std::string* Taxonomy::category(std::string_view token) const {
  auto it = categories_.find(std::string(canonical(token)));
  return it == categories_.end() ? nullptr : &it->second;
}

std::string_view Taxonomy::canonical(std::string_view token) const {
  auto it = aliases_.find(std::string(token));
  return it == aliases_.end() ? token : std::string_view(it->second);
}

bool Taxonomy::is_known_family(std::string_view token) const {
  return families_.contains(std::string(canonical(token)));
}

std::string ResolvedToken::tag() const {
  switch (kind) {
    case TokenKind::Category:
      return category + ":" + token;
    case TokenKind::KnownFamily:
      return "FAM:" + token;
    case TokenKind::UnknownFamily:
      break;
  }
  return "UNK:" + token;
}

std::vector<std::string> tokenize_label(std::string_view engine, std::string_view label,
                                        const Taxonomy* taxonomy) {
  const std::string engine_lc = text::to_lower(engine);
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= kMinTokenLength && !is_all_digits_or_hex(cur) && cur != engine_lc &&
        !(taxonomy && taxonomy->is_noise(cur))) {
      out.push_back(cur);
    }
    cur.clear();
  };
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

ResolvedToken resolve_token(std::string_view token, const Taxonomy& taxonomy) {
  ResolvedToken r;
  r.token = std::string(taxonomy.canonical(token));
  if (const auto* cat = taxonomy.category(r.token)) {
    r.kind = TokenKind::Category;
    r.category = *cat;
  } else if (taxonomy.is_known_family(r.token)) {
    r.kind = TokenKind::KnownFamily;
  } else {
    r.kind = TokenKind::UnknownFamily;
  }
  return r;
}

LabelResult label_sample(std::span<const Detection> detections, const Taxonomy& taxonomy) {
  // Engine counts per candidate (keyed by canonical token) and per category tag.
  std::map<std::string, std::pair<int, bool>> candidates;  // token -> (engines, known)
  std::map<std::string, int> tags;
  int labeled_engines = 0;
  int pup_engines = 0;

  for (const auto& det : detections) {
    if (!det.label) continue;
    ++labeled_engines;
    std::set<std::string> seen_candidates;
    std::set<std::string> seen_tags;
    bool pup = false;
    for (const auto& tok : tokenize_label(det.engine, *det.label, &taxonomy)) {
      auto resolved = resolve_token(tok, taxonomy);
      if (resolved.is_candidate()) {
        const bool known = resolved.kind == TokenKind::KnownFamily;
        if (seen_candidates.insert(resolved.token).second) {
          auto& slot = candidates[resolved.token];
          ++slot.first;
          slot.second = known;
        }
      } else {
        pup = pup || is_pup_category(resolved.category);
        if (auto tag = resolved.tag(); seen_tags.insert(tag).second) ++tags[tag];
      }
    }
    if (pup) ++pup_engines;
  }

  LabelResult result;
  // std::map iteration is lexicographic, so the first maximum wins ties.
  const std::pair<const std::string, std::pair<int, bool>>* best = nullptr;
  for (const auto& entry : candidates) {
    if (!best || entry.second.first > best->second.first) best = &entry;
  }
  if (best && best->second.first >= 2) {
    result.family = (best->second.second ? "FAM:" : "UNK:") + best->first;
  }
  for (const auto& [tag, count] : tags) {
    if (count >= 2) result.tags.emplace_back(tag, count);
  }
  result.is_pup = labeled_engines > 0 && 2 * pup_engines > labeled_engines;
  return result;
}

}  // namespace vtfeed

#pragma once

#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace vtfeed {

/// One engine's verdict in a scan. A NULL label means the engine did not detect the file.
struct Detection {
  std::string engine;
  std::optional<std::string> label;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Token categories used by the labeler. Category strings are the left part of a tag,
/// e.g. "CLASS", "CLASS:pup", "BEH", "FILE", "GEN", "FAM".
class Taxonomy {
 public:
  /// Built-in starter taxonomy (same content as data/taxonomy.tsv and data/aliases.tsv).
  static Taxonomy defaults();

  /// `token<TAB>category` lines; category NOISE marks engine-noise tokens dropped at tokenization.
  /// `alias<TAB>canonical` lines. Throws Error when an alias target is itself aliased.
  static Taxonomy parse(std::istream& categories, std::istream& aliases);
  static Taxonomy load(const std::string& category_path, const std::string& alias_path);

  bool is_noise(std::string_view token) const;
  /// Category of a token after alias resolution, or nullopt for unknown tokens.
  const std::string* category(std::string_view token) const;
  /// Canonical token after one alias step (the token itself when not aliased).
  std::string_view canonical(std::string_view token) const;
  bool is_known_family(std::string_view token) const;

 private:
  std::unordered_map<std::string, std::string> categories_;
  std::unordered_map<std::string, std::string> aliases_;
  std::unordered_set<std::string> noise_;
  std::unordered_set<std::string> families_;
};

enum class TokenKind {
  Category,       // non-family token with a taxonomy category
  KnownFamily,    // family candidate listed in the taxonomy (FAM:)
  UnknownFamily,  // family candidate not in the taxonomy (UNK:)
};

struct ResolvedToken {
  TokenKind kind = TokenKind::UnknownFamily;
  std::string token;     // canonical token
  std::string category;  // set for TokenKind::Category

  bool is_candidate() const noexcept { return kind != TokenKind::Category; }
  /// "CLASS:trojan", "FAM:zbot", "UNK:foo".
  std::string tag() const;

  friend bool operator==(const ResolvedToken&, const ResolvedToken&) = default;
};

struct LabelResult {
  std::optional<std::string> family;                // "FAM:x" or "UNK:x"
  std::vector<std::pair<std::string, int>> tags;    // tag -> engine count, sorted by tag
  bool is_pup = false;

  friend bool operator==(const LabelResult&, const LabelResult&) = default;
};

/// Lowercase, split on non-alphanumerics, drop short/hex/digit tokens and noise tokens.
/// Passing no taxonomy skips the noise filter.
std::vector<std::string> tokenize_label(std::string_view engine, std::string_view label,
                                        const Taxonomy* taxonomy = nullptr);

ResolvedToken resolve_token(std::string_view token, const Taxonomy& taxonomy);

LabelResult label_sample(std::span<const Detection> detections, const Taxonomy& taxonomy);

}  // namespace vtfeed

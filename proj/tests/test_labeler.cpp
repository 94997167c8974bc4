#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "vtfeed/error.hpp"
#include "vtfeed/labeler.hpp"

using namespace vtfeed;

namespace {

using Tokens = std::vector<std::string>;

Detection det(std::string engine, std::optional<std::string> label) { return {std::move(engine), std::move(label)}; }

}  // namespace

TEST_SUITE("labeler") {

TEST_CASE("tokenize_label") {
  const auto tax = Taxonomy::defaults();
  CHECK(tokenize_label("E1", "Win32.Zbot.a", &tax) == Tokens{"zbot"});
  CHECK(tokenize_label("E1", "Win32.Zbot.a") == Tokens{"win32", "zbot"});
  CHECK(tokenize_label("E2", "Trojan.GenericKD.123", &tax) == Tokens{"trojan", "generickd"});
  CHECK(tokenize_label("E3", "", &tax).empty());
  // Hex-only tokens and the engine's own name go.
  CHECK(tokenize_label("Kaspersky", "HEUR:Trojan.Kaspersky.deadbeef", nullptr) == Tokens{"heur", "trojan"});
  CHECK(tokenize_label("E", "W32/Sality-AT!@#ramnit", nullptr) == Tokens{"sality", "ramnit"});
}

TEST_CASE("resolve_token") {
  const auto tax = Taxonomy::defaults();
  const auto zeus = resolve_token("zeus", tax);
  CHECK(zeus.kind == TokenKind::KnownFamily);
  CHECK(zeus.token == "zbot");
  CHECK(zeus.tag() == "FAM:zbot");
  const auto mal = resolve_token("malicious", tax);
  CHECK(mal.kind == TokenKind::Category);
  CHECK(mal.tag() == "GEN:malicious");
  CHECK_FALSE(mal.is_candidate());
  CHECK(resolve_token("ddos", tax).tag() == "BEH:ddos");
  const auto unk = resolve_token("qwertyfam", tax);
  CHECK(unk.kind == TokenKind::UnknownFamily);
  CHECK(unk.tag() == "UNK:qwertyfam");
}

TEST_CASE("label_sample examples") {
  const auto tax = Taxonomy::defaults();
  std::vector<Detection> d{det("A", "Win32.Zbot.a"), det("B", "Trojan.Zeus!gen"), det("C", "Generic.Malware")};
  auto r = label_sample(d, tax);
  CHECK(r.family == "FAM:zbot");
  CHECK_FALSE(r.is_pup);

  d = {det("A", "Generic.Malware"), det("B", "Trojan.Generic"), det("C", "Malicious")};
  CHECK_FALSE(label_sample(d, tax).family);

  d = {det("A", "Adware.X"), det("B", "Adware.X"), det("C", "Adware.X"), det("D", "Trojan.Y"),
       det("E", "Trojan.Y")};
  CHECK(label_sample(d, tax).is_pup);
  d.pop_back();
  d.push_back(det("E", std::nullopt));
  CHECK(label_sample(d, tax).is_pup);
  d = {det("A", "Adware.X"), det("B", "Adware.X"), det("C", "Trojan.Y"), det("D", "Trojan.Y")};
  CHECK_FALSE(label_sample(d, tax).is_pup);

  CHECK(label_sample({}, tax) == LabelResult{});
}

TEST_CASE("family needs two engines and ties go lexicographic") {
  const auto tax = Taxonomy::defaults();
  std::vector<Detection> d{det("A", "Trojan.Foozle"), det("B", "Trojan.Barzle")};
  CHECK_FALSE(label_sample(d, tax).family);
  d = {det("A", "Trojan.Foozle.Barzle"), det("B", "Trojan.Barzle"), det("C", "Worm.Foozle")};
  CHECK(label_sample(d, tax).family == "UNK:barzle");
  // One engine repeating a token counts once.
  d = {det("A", "Foozle.Foozle.Foozle"), det("B", "Trojan")};
  CHECK_FALSE(label_sample(d, tax).family);
}

TEST_CASE("tags need two engines") {
  const auto tax = Taxonomy::defaults();
  std::vector<Detection> d{det("A", "Trojan.Zbot"), det("B", "Trojan.Zbot.ddos"), det("C", "Worm.Zbot")};
  const auto r = label_sample(d, tax);
  const std::vector<std::pair<std::string, int>> expected{{"CLASS:trojan", 2}};
  CHECK(r.tags == expected);
}

TEST_CASE("label_sample ignores engine order and duplicate tokens") {
  const auto tax = Taxonomy::defaults();
  std::vector<Detection> d{det("A", "Win32.Zbot.a"),   det("B", "Trojan.Zeus!gen"), det("C", "Adware.Quxly"),
                           det("D", "Trojan.Quxly"),     det("E", std::nullopt),      det("F", "PUP.Gen.Quxly"),
                           det("G", "Trojan.Quxly.ddos"), det("H", "Backdoor.Zbot")};
  const auto expected = label_sample(d, tax);
  CHECK(expected.family == "UNK:quxly");
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(d.begin(), d.end(), rng);
    CHECK(label_sample(d, tax) == expected);
  }
  auto dup = d;
  for (auto& x : dup) {
    if (x.label) *x.label += "." + *x.label;
  }
  CHECK(label_sample(dup, tax) == expected);
}

TEST_CASE("single candidate in two labels is the family") {
  const auto tax = Taxonomy::defaults();
  std::vector<Detection> d{det("A", "Trojan.Plonk"), det("B", "Win32.Plonk.gen"), det("C", "Generic.Trojan")};
  CHECK(label_sample(d, tax).family == "UNK:plonk");
}

TEST_CASE("taxonomy files") {
  std::istringstream cats("# comment\nfoo\tFAM\nbar\tCLASS\nnoisy\tNOISE\n");
  std::istringstream aliases("baz\tfoo\n");
  const auto tax = Taxonomy::parse(cats, aliases);
  CHECK(tax.is_noise("noisy"));
  CHECK(tax.canonical("baz") == "foo");
  CHECK(tax.is_known_family("baz"));
  REQUIRE(tax.category("bar"));
  CHECK(*tax.category("bar") == "CLASS");

  std::istringstream cats2("foo\tFAM\n");
  std::istringstream cyclic("a\tb\nb\tfoo\n");
  CHECK_THROWS_AS(Taxonomy::parse(cats2, cyclic), Error);
}

}  // TEST_SUITE

#include <doctest.h>

#include <cstdlib>
#include <set>
#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"
#include "vtfeed/text.hpp"

using testsupport::slurp;
using testsupport::spit;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(VTFEED_CLI) + " " + args + " 2>/dev/null >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::set<std::string> first_column(const std::string& path) {
  std::set<std::string> out;
  std::istringstream in(slurp(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') out.insert(line.substr(0, line.find('\t')));
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes") {
  testsupport::TempDir tmp;
  CHECK(run("--help") == 0);
  CHECK(run("cluster fvg --help") == 0);
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("cluster fvg") == 2);
  spit(tmp.file("bad.ffv1"), "#ffv0\n");
  CHECK(run("cluster hac -f " + tmp.file("bad.ffv1") + " -o " + tmp.file("c.tsv")) == 1);
  spit(tmp.file("empty.ffv1"), "#ffv1\n");
  CHECK(run("cluster hac -f " + tmp.file("empty.ffv1") + " -o " + tmp.file("c.tsv") + " --memory-mib 1") == 2);
}

TEST_CASE("fvg on the four-row example") {
  testsupport::TempDir tmp;
  const std::string s1(64, '1'), s2(64, '2'), s3(64, '3'), s4(64, '4');
  auto row = [](const std::string& sha, const std::string& vhash) {
    return sha + "\t100\t100\t0\t0\t\t\t\t\t" + vhash + "\t\t\t\t\t\t\n";
  };
  spit(tmp.file("f.ffv1"), "#ffv1\n" + row(s1, "A") + row(s2, "A") + row(s3, "B") + row(s4, ""));
  REQUIRE(run("cluster fvg --feature vhash -f " + tmp.file("f.ffv1") + " -o " + tmp.file("c.tsv")) == 0);
  CHECK(slurp(tmp.file("c.tsv")) == "0\t" + s1 + "\tnone\n0\t" + s2 + "\tnone\n1\t" + s3 + "\tunique-value\n2\t" + s4 +
                                        "\tnull-feature\n");
  REQUIRE(run("eval -c " + tmp.file("c.tsv") + " --truth-clusters " + tmp.file("c.tsv")) == 0);
  const std::string cmd = std::string(VTFEED_CLI) + " eval -c " + tmp.file("c.tsv") + " --truth-clusters " +
                          tmp.file("c.tsv") + " > " + tmp.file("eval.txt");
  REQUIRE(std::system(cmd.c_str()) == 0);
  const auto first = slurp(tmp.file("eval.txt")).substr(0, slurp(tmp.file("eval.txt")).find('\n'));
  const auto rec = nlohmann::json::parse(first);
  CHECK(rec["f1"].get<double>() == 1.0);
  CHECK(rec["precision"].get<double>() == 1.0);
}

TEST_CASE("end to end on a 100K-report synthetic feed") {
  testsupport::TempDir tmp;
  auto f = [&](const char* name) { return tmp.file(name); };
  REQUIRE(run("synth --reports 100000 --seed 17 -o " + f("feed.jsonl") + " --manifest " + f("manifest.json")) == 0);
  const auto manifest = nlohmann::json::parse(slurp(f("manifest.json")));
  REQUIRE(run("extract " + f("feed.jsonl") + " -o " + f("features.ffv1") + " --window-start 2021-01-01 --window-end 2021-01-31") == 0);
  REQUIRE(run("cluster fvg --feature vhash -f " + f("features.ffv1") + " -o " + f("clusters.tsv")) == 0);
  REQUIRE(run("verdict -c " + f("clusters.tsv") + " -f " + f("features.ffv1") + " -o " + f("verdicts.tsv")) == 0);
  REQUIRE(run("hunt --ratio r4 -c " + f("clusters.tsv") + " -f " + f("features.ffv1") + " -o " + f("flagged.tsv")) == 0);
  const auto planted = manifest["planted_flagged"].get<std::vector<std::string>>();
  CHECK(first_column(f("flagged.tsv")) == std::set<std::string>(planted.begin(), planted.end()));
  CHECK(first_column(f("verdicts.tsv")).size() ==
        manifest["malicious_clusters"].get<std::size_t>() + manifest["benign_clusters"].get<std::size_t>() +
            manifest["minority_clusters"].get<std::size_t>());

  // Byte-identical reruns, also with a different thread count and a spilling sort.
  REQUIRE(run("cluster fvg --feature vhash --threads 1 --memory-mib 64 -f " + f("features.ffv1") + " -o " + f("again.tsv")) == 0);
  CHECK(slurp(f("again.tsv")) == slurp(f("clusters.tsv")));
  REQUIRE(run("cluster hact -f " + f("features.ffv1") + " -o " + f("hact1.tsv") + " --seed 3") == 0);
  REQUIRE(run("cluster hact -f " + f("features.ffv1") + " -o " + f("hact2.tsv") + " --seed 3 --threads 1") == 0);
  CHECK(slurp(f("hact1.tsv")) == slurp(f("hact2.tsv")));
  REQUIRE(run("extract " + f("feed.jsonl") + " -o " + f("features2.ffv1") + " --window-start 2021-01-01 --window-end 2021-01-31") == 0);
  CHECK(slurp(f("features2.ffv1")) == slurp(f("features.ffv1")));

  REQUIRE(run("stats " + f("feed.jsonl") + " -o " + f("stats.json") + " --csv " + f("csv") +
              " --window-start 2021-01-01 --window-end 2021-01-31") == 0);
  const auto stats = nlohmann::json::parse(slurp(f("stats.json")));
  CHECK(stats["reports"].get<std::size_t>() == manifest["reports"].get<std::size_t>());
  CHECK(stats["daily"]["days"].size() == 30);
  CHECK(std::filesystem::exists(f("csv/daily.csv")));

  REQUIRE(run("fud " + f("feed.jsonl") + " -o " + f("fud.tsv") + " --window-start 2021-01-01 --window-end 2021-01-31") == 0);
  CHECK(slurp(f("fud.tsv")).rfind("#sha256\t", 0) == 0);

  REQUIRE(run("label " + f("feed.jsonl") + " -f " + f("features.ffv1") + " -o " + f("labeled.ffv1")) == 0);
  CHECK(slurp(f("labeled.ffv1")) == slurp(f("features.ffv1")));
}

TEST_CASE("sort subcommand") {
  testsupport::TempDir tmp;
  spit(tmp.file("in.tsv"), "b\t2\na\t3\nc\t1\n");
  REQUIRE(run("sort -k 2 " + tmp.file("in.tsv") + " -o " + tmp.file("out.tsv")) == 0);
  CHECK(slurp(tmp.file("out.tsv")) == "c\t1\nb\t2\na\t3\n");
  CHECK(run("sort -k 0 " + tmp.file("in.tsv") + " -o " + tmp.file("out.tsv")) == 2);
}

TEST_CASE("malformed reports are skipped") {
  testsupport::TempDir tmp;
  const std::string good = R"({"sha256":")" + std::string(64, 'a') + R"(","scan_date":5,"fseen_date":5,"vt_score":0})";
  spit(tmp.file("r.jsonl"), good + "\n{broken\n\n");
  REQUIRE(run("extract " + tmp.file("r.jsonl") + " -o " + tmp.file("f.ffv1")) == 0);
  CHECK(slurp(tmp.file("f.ffv1")).size() > 70);
}

}  // TEST_SUITE

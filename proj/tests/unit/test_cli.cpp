// Drives the built command-line binary end to end.

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"

#include <array>
#include <cstdio>
#include <map>
#include <regex>
#include <string>

#ifndef AFX_CLI_PATH
#error "AFX_CLI_PATH must point at the CLI binary"
#endif

namespace fs = std::filesystem;

namespace {

struct Output {
  int status = 0;
  std::string text;  // stdout and stderr interleaved
};

Output sh(const std::string& args) {
  const std::string cmd = std::string(AFX_CLI_PATH) + " " + args + " 2>&1";
  Output out;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) out.text += buf.data();
  const int rc = pclose(p);
  out.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return out;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = fixtures::read_file(e.path());
  return files;
}

const char* kQuickIni = R"([learners]
forest_trees = 6
gbt_rounds = 15
iterations = 8

[synth]
subjects = 2
videos = 2
duration_s = 20
)";

}  // namespace

TEST_CASE("synth, validate, run twice, score") {
  fixtures::TempDir dir("cli");
  const fs::path ini = dir.path / "quick.ini";
  {
    std::ofstream out(ini);
    out << kQuickIni;
  }
  const std::string cfg = "--config " + ini.string();
  const fs::path data = dir.path / "data";

  auto r = sh("synth " + cfg + " --seed 6 -o " + data.string());
  REQUIRE(r.status == 0);
  CHECK(r.text.find("synth files=8") != std::string::npos);

  r = sh("validate " + cfg + " -d " + data.string());
  CHECK(r.status == 0);
  CHECK(r.text.find("ok files=8 labelled=8") != std::string::npos);

  const auto before = snapshot(data);
  auto a = sh("run " + cfg + " --seed 3 -d " + data.string() + " -o " + (dir.path / "a").string());
  auto b = sh("run " + cfg + " --seed 3 -d " + data.string() + " -o " + (dir.path / "b").string());
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  CHECK(snapshot(data) == before);  // inputs untouched

  const std::regex hash_re("manifest_hash=([0-9a-f]{64})");
  std::smatch ma, mb;
  REQUIRE(std::regex_search(a.text, ma, hash_re));
  REQUIRE(std::regex_search(b.text, mb, hash_re));
  CHECK(ma[1].str() == mb[1].str());
  const auto pa = snapshot(dir.path / "a" / "predictions");
  CHECK(pa.size() == 4);
  CHECK(pa == snapshot(dir.path / "b" / "predictions"));

  // The manifest echoes the effective config and its own hash.
  const auto manifest = nlohmann::json::parse(fixtures::read_file(dir.path / "a" / "manifest.json"));
  CHECK(manifest["manifest_hash"] == ma[1].str());
  CHECK(manifest["config"]["run.seed"] == "3");
  CHECK(manifest["config"]["learners.forest_trees"] == "6");
  CHECK_FALSE(manifest["config"].contains("paths.output"));

  auto c = sh("run " + cfg + " --seed 4 -d " + data.string() + " -o " + (dir.path / "c").string());
  std::smatch mc;
  REQUIRE(std::regex_search(c.text, mc, hash_re));
  CHECK(mc[1].str() != ma[1].str());

  r = sh("score " + cfg + " -d " + data.string() + " -o " + (dir.path / "a").string());
  REQUIRE(r.status == 0);
  const std::regex overall_re("overall_rmse=([0-9.e+-]+)\n");
  std::smatch mo;
  REQUIRE(std::regex_search(r.text, mo, overall_re));
  const auto summary = fixtures::read_file(dir.path / "a" / "scores" / "summary.csv");
  CHECK(summary.find("# overall (mean over scenario x target): " + mo[1].str() + "\n") != std::string::npos);
  CHECK(fs::exists(dir.path / "a" / "scores" / "per_file.csv"));
}

TEST_CASE("failures are single machine-parsable lines") {
  fixtures::TempDir dir("cli_err");
  const fs::path data = dir.path / "data";
  REQUIRE(sh("synth --set synth.subjects=1 --set synth.videos=2 --set synth.duration_s=10 -o " + data.string()).status == 0);

  const std::regex err_re(R"re(^error code=([A-Za-z]+) msg="(.*)"\n$)re");
  auto r = sh("run -d " + data.string() + " -o " + (dir.path / "o").string() + " --set run.bogus=1");
  CHECK(r.status != 0);
  std::smatch m;
  REQUIRE(std::regex_match(r.text, m, err_re));
  CHECK(m[1].str() == "ConfigError");
  CHECK(m[2].str().find("run.bogus") != std::string::npos);

  r = sh("run --config " + (dir.path / "missing.ini").string());
  CHECK(r.status != 0);
  CHECK(std::regex_match(r.text, err_re));

  // One malformed file: nonzero exit naming it.
  fs::path victim;
  for (const auto& e : fs::recursive_directory_iterator(data))
    if (e.path().parent_path().filename() == "physiology") {
      victim = e.path();
      break;
    }
  REQUIRE(!victim.empty());
  auto text = fixtures::read_file(victim);
  text.insert(text.find('\n') + 1, "not,a,number,row,,,,,\n");
  {
    std::ofstream out(victim, std::ios::trunc);
    out << text;
  }
  r = sh("validate -d " + data.string());
  CHECK(r.status != 0);
  REQUIRE(std::regex_match(r.text, m, err_re));
  CHECK(m[2].str().find(victim.string()) != std::string::npos);

  r = sh("frobnicate");
  CHECK(r.status != 0);
  r = sh("score -d " + data.string() + " -o " + (dir.path / "empty").string());
  CHECK(r.status != 0);
  CHECK(std::regex_match(r.text, m, err_re));
}

// Exercises the shared library through the C header only.

#include "affectfuse/affectfuse.h"
#include "doctest.h"
#include "fixtures.hpp"

#include <cstring>
#include <string>
#include <vector>

namespace {

std::string get(const afx_config* cfg, const char* key) {
  size_t needed = 0;
  REQUIRE(afx_config_get(cfg, key, nullptr, 0, &needed) == AFX_OK);
  std::string buf(needed, '\0');
  REQUIRE(afx_config_get(cfg, key, buf.data(), buf.size(), &needed) == AFX_OK);
  buf.resize(needed - 1);
  return buf;
}

std::vector<std::string> lines(const afx_result* r) {
  std::vector<std::string> out;
  for (size_t i = 0; i < afx_result_line_count(r); ++i) out.emplace_back(afx_result_line(r, i));
  return out;
}

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(afx_status_name(AFX_OK)) == "Ok");
  CHECK(std::string(afx_status_name(AFX_E_CONFIG)) == "ConfigError");
  CHECK(std::string(afx_status_name(AFX_E_LENGTH_MISMATCH)) == "LengthMismatch");
  CHECK(std::string(afx_status_name(AFX_E_EMPTY_FOLD)) == "EmptyFold");
  CHECK(std::string(afx_status_name(static_cast<afx_status>(999))) == "Unknown");
  CHECK(std::string(afx_version()).size() > 0);

  afx_config* cfg = nullptr;
  CHECK(afx_config_load("/no/such/file.ini", &cfg) == AFX_E_CONFIG);
  CHECK(cfg == nullptr);
  CHECK(std::string(afx_last_error()).find("/no/such/file.ini") != std::string::npos);
  CHECK(afx_config_new(nullptr) == AFX_E_INVALID_ARGUMENT);
}

TEST_CASE("config handle") {
  afx_config* cfg = nullptr;
  REQUIRE(afx_config_new(&cfg) == AFX_OK);
  CHECK(get(cfg, "run.smoothing") == "10");
  CHECK(afx_config_set(cfg, "run.seed", "77") == AFX_OK);
  CHECK(get(cfg, "run.seed") == "77");
  CHECK(afx_config_override(cfg, "learners.knn_k=3") == AFX_OK);
  CHECK(get(cfg, "learners.knn_k") == "3");
  CHECK(afx_config_set(cfg, "run.nope", "1") == AFX_E_CONFIG);
  CHECK(std::string(afx_last_error()).find("run.nope") != std::string::npos);
  CHECK(afx_config_override(cfg, "no-equals-sign") == AFX_E_CONFIG);

  // Truncation keeps the terminator and reports the full size.
  char small[4];
  size_t needed = 0;
  CHECK(afx_config_get(cfg, "learners.roster", small, sizeof small, &needed) == AFX_OK);
  CHECK(std::strlen(small) == 3);
  CHECK(needed > 4);

  size_t n = 0;
  REQUIRE(afx_config_dump(cfg, nullptr, 0, &n) == AFX_OK);
  std::string ini(n, '\0');
  REQUIRE(afx_config_dump(cfg, ini.data(), ini.size(), &n) == AFX_OK);
  CHECK(ini.find("[run]") != std::string::npos);
  CHECK(ini.find("seed = 77") != std::string::npos);

  fixtures::TempDir dir("capi_cfg");
  {
    std::ofstream out(dir.path / "c.ini");
    out << ini.c_str();
  }
  afx_config* loaded = nullptr;
  REQUIRE(afx_config_load((dir.path / "c.ini").c_str(), &loaded) == AFX_OK);
  CHECK(get(loaded, "run.seed") == "77");
  afx_config_free(loaded);

  afx_result* r = nullptr;
  CHECK(afx_run_command(cfg, "dance", &r) == AFX_E_CONFIG);
  CHECK(r == nullptr);
  CHECK(afx_run_command(cfg, "run", &r) == AFX_E_CONFIG);  // no paths set
  afx_config_free(cfg);
}

TEST_CASE("numeric helpers") {
  const std::vector<double> a = {0.0, 0.0}, b = {3.0, 4.0};
  double r = -1.0;
  CHECK(afx_rmse(a.data(), b.data(), 2, &r) == AFX_OK);
  CHECK(r == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK(afx_rmse(a.data(), b.data(), 0, &r) == AFX_E_EMPTY);
  CHECK(afx_rmse(nullptr, b.data(), 2, &r) == AFX_E_INVALID_ARGUMENT);

  std::vector<double> track(40, 9.9);
  std::vector<double> out(40);
  CHECK(afx_postprocess_track(track.data(), track.size(), 10, out.data()) == AFX_OK);
  for (double v : out) CHECK(v == 9.5);
  CHECK(afx_postprocess_track(track.data(), track.size(), 0, out.data()) != AFX_OK);
  // In-place use.
  CHECK(afx_postprocess_track(track.data(), track.size(), 1, track.data()) == AFX_OK);
  CHECK(track[0] == 9.5);

  const double t1[] = {1, 2, 3}, t2[] = {3, 4, 5};
  const double* tracks[] = {t1, t2};
  double fused[3];
  CHECK(afx_late_fuse_mean(tracks, 2, 3, fused) == AFX_OK);
  CHECK(fused[0] == 2.0);
  CHECK(fused[2] == 4.0);
  CHECK(afx_late_fuse_mean(tracks, 0, 3, fused) == AFX_E_EMPTY_LIST);
}

TEST_CASE("commands through the C API") {
  fixtures::TempDir dir("capi_cmd");
  afx_config* cfg = nullptr;
  REQUIRE(afx_config_new(&cfg) == AFX_OK);
  const std::string data = (dir.path / "data").string();
  REQUIRE(afx_config_set(cfg, "paths.output", data.c_str()) == AFX_OK);
  REQUIRE(afx_config_override(cfg, "synth.subjects=1") == AFX_OK);
  REQUIRE(afx_config_override(cfg, "synth.videos=2") == AFX_OK);
  REQUIRE(afx_config_override(cfg, "synth.duration_s=12") == AFX_OK);
  afx_result* r = nullptr;
  REQUIRE(afx_run_command(cfg, "synth", &r) == AFX_OK);
  CHECK(lines(r).front().starts_with("synth files=4"));
  afx_result_free(r);

  REQUIRE(afx_config_set(cfg, "paths.data", data.c_str()) == AFX_OK);
  REQUIRE(afx_config_set(cfg, "paths.output", "") == AFX_OK);
  REQUIRE(afx_run_command(cfg, "validate", &r) == AFX_OK);
  CHECK(lines(r).back() == "ok files=4 labelled=4");
  afx_result_free(r);
  afx_config_free(cfg);
}

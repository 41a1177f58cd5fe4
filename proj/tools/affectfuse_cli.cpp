// Command-line front end. Talks to the library only through the C API.

#include "affectfuse/affectfuse.h"

#include "CLI11.hpp"

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

struct ConfigDeleter {
  void operator()(afx_config* c) const { afx_config_free(c); }
};
struct ResultDeleter {
  void operator()(afx_result* r) const { afx_result_free(r); }
};
using ConfigPtr = std::unique_ptr<afx_config, ConfigDeleter>;
using ResultPtr = std::unique_ptr<afx_result, ResultDeleter>;

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

int report(afx_status st) {
  std::fprintf(stderr, "error code=%s msg=%s\n", afx_status_name(st), quoted(afx_last_error()).c_str());
  return static_cast<int>(st);
}

struct Options {
  std::string config;
  std::string output;
  std::string data;
  std::string seed;
  std::string workers;
  std::vector<std::string> scenarios;
  std::vector<std::string> sets;
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous valence/arousal prediction from physiological recordings"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config,-c", o.config, "INI configuration file");
  app.add_option("--output,-o", o.output, "Output root (paths.output)");
  app.add_option("--data,-d", o.data, "Dataset root (paths.data)");
  app.add_option("--seed", o.seed, "Seed (run.seed; synth.seed for synth)");
  app.add_option("--workers,-j", o.workers, "Worker threads (run.workers)");
  app.add_option("--scenario", o.scenarios,
                 "Scenario(s), 1-4 or names (run.scenarios; synth.scenarios for synth; lag.scenario for lag-sweep)")
      ->delimiter(',');
  app.add_option("--set", o.sets, "Override, section.key=value (repeatable)");
  app.add_flag_callback("--version", [] {
    std::printf("affectfuse %s\n", afx_version());
    throw CLI::Success();
  });

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "Check corpus integrity"},
      {"synth", "Generate a synthetic corpus under --output"},
      {"run", "Train, predict and write predictions + manifest under --output"},
      {"score", "Score predictions under --output against the corpus"},
      {"lag-sweep", "Rating/physiology delay sweep"},
      {"inspect", "Per-file feature and annotation summary"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  const std::string command = app.get_subcommands().front()->get_name();

  afx_config* raw = nullptr;
  afx_status st = o.config.empty() ? afx_config_new(&raw) : afx_config_load(o.config.c_str(), &raw);
  if (st != AFX_OK) return report(st);
  ConfigPtr cfg(raw);

  auto set = [&](const char* key, const std::string& value) {
    if (st == AFX_OK && !value.empty()) st = afx_config_set(cfg.get(), key, value.c_str());
  };
  set("paths.output", o.output);
  set("paths.data", o.data);
  set(command == "synth" ? "synth.seed" : "run.seed", o.seed);
  set("run.workers", o.workers);
  if (!o.scenarios.empty()) {
    if (command == "synth") set("synth.scenarios", join(o.scenarios));
    else if (command == "lag-sweep") set("lag.scenario", o.scenarios.front());
    else set("run.scenarios", join(o.scenarios));
  }
  for (const auto& s : o.sets)
    if (st == AFX_OK) st = afx_config_override(cfg.get(), s.c_str());
  if (st != AFX_OK) return report(st);

  afx_result* result_raw = nullptr;
  st = afx_run_command(cfg.get(), command.c_str(), &result_raw);
  if (st != AFX_OK) return report(st);
  ResultPtr result(result_raw);
  for (size_t i = 0; i < afx_result_line_count(result.get()); ++i) std::printf("%s\n", afx_result_line(result.get(), i));
  return 0;
}

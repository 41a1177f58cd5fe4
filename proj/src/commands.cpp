#include "affectfuse/commands.hpp"

#include "affectfuse/error.hpp"
#include "affectfuse/eval.hpp"
#include "affectfuse/pipeline.hpp"
#include "csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace affectfuse::commands {

namespace fs = std::filesystem;
using csv::format_double;

namespace {

fs::path required_path(const config::Config& cfg, const std::string& key) {
  const auto& v = cfg.get(key);
  if (v.empty()) throw Error(Errc::config_error, fmt::format("{} is not set", key));
  return fs::path(v);
}

corpus::DatasetIndex load_index(const config::Config& cfg) {
  const fs::path root = required_path(cfg, "paths.data");
  if (!fs::is_directory(root)) throw Error(Errc::config_error, fmt::format("paths.data {} is not a directory", root.string()));
  return corpus::enumerate_dataset(root);
}

CommandResult validate(const config::Config& cfg) {
  const auto index = load_index(cfg);
  CommandResult r;
  std::size_t bad = 0, labelled = 0;
  std::string first;
  Errc first_code = Errc::ok;
  for (const auto& e : index.entries) {
    try {
      const auto rec = corpus::load_recording(e.physiology);
      if (e.annotations) {
        const auto track = corpus::load_annotations(*e.annotations);
        try {
          corpus::check_pairing(rec, track);
        } catch (const Error& err) {
          err.rethrow_with(e.annotations->string());
        }
        ++labelled;
      }
    } catch (const Error& err) {
      const std::string msg = err.what();
      const std::string where = msg.find(e.physiology.filename().string()) == std::string::npos
                                    ? fmt::format("{}: {}", e.physiology.string(), msg)
                                    : msg;
      r.lines.push_back(fmt::format("FAIL {} {}", errc_name(err.code()), where));
      if (bad++ == 0) {
        first = where;
        first_code = err.code();
      }
    }
  }
  if (bad > 0)
    throw Error(first_code, fmt::format("{} of {} files failed validation; first: {}", bad, index.entries.size(), first));
  for (auto s : corpus::kAllScenarios) {
    const auto entries = index.select(s);
    if (entries.empty()) continue;
    r.lines.push_back(fmt::format("{} folds={} files={}", corpus::scenario_name(s), index.folds(s).size(), entries.size()));
  }
  r.lines.push_back(fmt::format("ok files={} labelled={}", index.entries.size(), labelled));
  return r;
}

CommandResult synth(const config::Config& cfg) {
  const fs::path out = required_path(cfg, "paths.output");
  const auto index = corpus::generate_synthetic_dataset(cfg.synthesis_seed(), cfg.synthesis_spec(), out);
  CommandResult r;
  r.lines.push_back(fmt::format("synth files={} root={}", index.entries.size(), out.string()));
  return r;
}

CommandResult run(const config::Config& cfg) {
  auto rc = cfg.run_config();
  required_path(cfg, "paths.output");
  const auto index = load_index(cfg);
  const auto result = pipeline::run(rc, index, cfg.echo());
  csv::write_text(rc.output_root / "config.ini", cfg.to_ini());
  CommandResult r;
  r.lines.push_back(fmt::format("run predictions={} models={}", result.predictions.size(), result.models.size()));
  r.lines.push_back(fmt::format("manifest_hash={}", result.manifest_hash));
  return r;
}

CommandResult score(const config::Config& cfg) {
  const fs::path out = required_path(cfg, "paths.output");
  const auto index = load_index(cfg);
  const auto tree = eval::score_predictions(index, out / "predictions");
  eval::write_file_scores_csv(tree, out / "scores" / "per_file.csv");
  eval::write_summary_csv(tree, out / "scores" / "summary.csv");
  CommandResult r;
  for (const auto& f : tree.folds)
    r.lines.push_back(fmt::format("{} fold {} arousal={:.4f} valence={:.4f}", corpus::scenario_name(f.scenario), f.fold,
                                  f.arousal.mean, f.valence.mean));
  for (const auto& s : tree.scenarios)
    r.lines.push_back(fmt::format("{} scenario arousal={:.4f}±{:.4f} valence={:.4f}±{:.4f}", corpus::scenario_name(s.scenario),
                                  s.arousal.mean, s.arousal.sd, s.valence.mean, s.valence.sd));
  r.lines.push_back(fmt::format("overall_rmse={}", format_double(tree.overall)));
  r.lines.push_back(fmt::format("overall_rmse_per_scenario={}", format_double(tree.overall_per_scenario)));
  return r;
}

CommandResult lag(const config::Config& cfg) {
  const fs::path out = required_path(cfg, "paths.output");
  const auto rc = cfg.lag_run_config();
  const auto opts = cfg.lag_options();
  const auto index = load_index(cfg);
  const auto table = eval::lag_sweep(rc, index, opts);
  eval::write_lag_table_csv(table, out / "lag" / "lag_table.csv");
  eval::write_lag_minima_csv(table, out / "lag" / "lag_minima.csv");
  CommandResult r;
  std::string head = "delay_s";
  for (const auto& s : table.subsets) head += " " + s;
  r.lines.push_back(head);
  for (std::size_t d = 0; d < table.delays.size(); ++d) {
    std::string row = fmt::format("{:.3f}", table.delays[d]);
    for (std::size_t s = 0; s < table.subsets.size(); ++s)
      row += fmt::format(" {:.4f}{}", table.rmse[d][s], table.best_row[s] == d ? "*" : "");
    r.lines.push_back(row);
  }
  for (std::size_t s = 0; s < table.subsets.size(); ++s)
    r.lines.push_back(fmt::format("min {} delay={:.3f}", table.subsets[s], table.delays[table.best_row[s]]));
  return r;
}

CommandResult inspect(const config::Config& cfg) {
  const auto rc = cfg.run_config();
  const auto index = load_index(cfg);
  pipeline::FeatureCache cache(rc.windows);
  std::vector<std::string> rows(index.entries.size());
  pipeline::parallel_for(index.entries.size(), rc.workers, [&](std::size_t i) {
    const auto& e = index.entries[i];
    const auto data = cache.get(e);
    const auto& m = data->features;
    std::size_t non_finite = 0;
    for (double v : m.data)
      if (!std::isfinite(v)) ++non_finite;
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
    };
    const double span = m.rows() > 1 ? m.timestamps.back() - m.timestamps.front() : 0.0;
    rows[i] = fmt::format("{},{},{},{},{:.3f},{},{:.4f},{:.4f}", e.key(), m.rows(), m.cols(), non_finite, span,
                          e.annotations ? "yes" : "no", mean(data->valence), mean(data->arousal));
  });
  CommandResult r;
  const std::string header = "file,rows,feature_width,non_finite,span_s,labelled,valence_mean,arousal_mean";
  r.lines.push_back(header);
  r.lines.insert(r.lines.end(), rows.begin(), rows.end());
  if (!cfg.get("paths.output").empty()) {
    std::string text;
    for (const auto& l : r.lines) text += l + "\n";
    csv::write_text(fs::path(cfg.get("paths.output")) / "inspect.csv", text);
  }
  return r;
}

}  // namespace

CommandResult execute(const config::Config& cfg, std::string_view command) {
  if (command == "validate") return validate(cfg);
  if (command == "synth") return synth(cfg);
  if (command == "run") return run(cfg);
  if (command == "score") return score(cfg);
  if (command == "lag-sweep") return lag(cfg);
  if (command == "inspect") return inspect(cfg);
  throw Error(Errc::config_error, fmt::format("unknown command '{}'", command));
}

}  // namespace affectfuse::commands

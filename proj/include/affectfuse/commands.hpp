#pragma once

#include "affectfuse/config.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace affectfuse::commands {

inline const std::vector<std::string> kCommands = {"validate", "synth", "run", "score", "lag-sweep", "inspect"};

struct CommandResult {
  std::vector<std::string> lines;  // human-readable report, one item per line
};

/// validate:  paths.data -> loads and pairs every file; fails naming the first bad file
/// synth:     [synth] -> synthetic dataset written to paths.output
/// run:       paths.data -> predictions, models, fold manifests, manifest.json under paths.output
/// score:     paths.data + paths.output/predictions -> paths.output/scores/{per_file,summary}.csv
/// lag-sweep: paths.data -> paths.output/lag/{lag_table,lag_minima}.csv
/// inspect:   paths.data -> per-file feature/annotation summary (also inspect.csv if paths.output set)
/// Unknown command is ConfigError.
CommandResult execute(const config::Config& cfg, std::string_view command);

}  // namespace affectfuse::commands

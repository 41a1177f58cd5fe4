#pragma once

#include "affectfuse/corpus.hpp"
#include "affectfuse/eval.hpp"
#include "affectfuse/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace affectfuse::config {

/// Flat "section.key" -> value view of an INI file. Every key has a default;
/// keys outside the known set are rejected (ConfigError).
///
///   [run]       scenarios, label_mode, seed, workers, smoothing, validation_fraction, save_models
///   [features]  ecg_window_s ... emg_window_s, context_halfwidth_s, context_rate_hz, max_delay_s
///   [learners]  roster, iterations, refit_on_all, knn_k, forest_*, rf_max_features, ...
///   [paths]     data, output
///   [synth]     seed, subjects, videos, duration_s, ..., scenarios
///   [lag]       scenario, fold, subsets, delays, test_fraction, smoothing, roster
class Config {
 public:
  Config();

  static Config from_file(const std::filesystem::path& path);
  static Config from_string(std::string_view ini_text);

  /// "section.key=value". Unknown key or missing '=' is ConfigError.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_set_explicitly(const std::string& key) const;

  /// All keys with effective values, sorted.
  const std::map<std::string, std::string>& values() const noexcept { return values_; }
  /// values() without paths.output, so hashes do not depend on where a run writes.
  std::map<std::string, std::string> echo() const;
  /// INI text of the effective configuration.
  std::string to_ini() const;

  static const std::vector<std::string>& known_keys();

  // Typed views; malformed values are ConfigError naming the key.
  pipeline::RunConfig run_config() const;
  corpus::SynthesisSpec synthesis_spec() const;
  std::uint64_t synthesis_seed() const;
  eval::LagSweepOptions lag_options() const;
  /// run_config() with the [lag] roster (if set) replacing the learner roster.
  pipeline::RunConfig lag_run_config() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace affectfuse::config

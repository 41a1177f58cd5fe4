#pragma once

#include "affectfuse/corpus.hpp"
#include "affectfuse/features.hpp"
#include "affectfuse/learners.hpp"
#include "affectfuse/scenarios.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace affectfuse::pipeline {

using corpus::DatasetEntry;
using corpus::DatasetIndex;
using corpus::Scenario;
using corpus::Target;

enum class LabelMode { independent, chain_valence_first, chain_arousal_first };
std::string_view label_mode_name(LabelMode m);
LabelMode parse_label_mode(std::string_view s);  // ConfigError

struct RunConfig {
  std::vector<Scenario> scenarios = {Scenario::across_time};
  features::WindowConfig windows;
  learners::EnsembleOptions ensemble;
  LabelMode label_mode = LabelMode::independent;
  int smoothing = 10;                // moving-average samples; 1 disables
  double validation_fraction = 0.2;  // trailing share of each training file
  std::uint64_t seed = 0;
  int workers = 1;
  bool save_models = true;
  std::filesystem::path data_root;
  std::filesystem::path output_root;

  void validate() const;  // ConfigError
};

/// Elementwise mean. EmptyList / LengthMismatch.
std::vector<double> late_fuse_mean(const std::vector<std::vector<double>>& predictions);

/// moving_average(n) then clamp to [0.5, 9.5].
std::vector<double> postprocess_track(std::span<const double> raw, int n = 10);

struct PredictionTrack {
  Scenario scenario = Scenario::across_time;
  int fold = 0;
  int subject_id = 0;
  int video_id = 0;
  std::vector<double> timestamps;
  std::vector<double> valence;
  std::vector<double> arousal;
  std::vector<std::string> valence_models;
  std::vector<std::string> arousal_models;
  std::filesystem::path relative_path;  // mirrors the test file's layout
  corpus::TimeUnit time_unit = corpus::TimeUnit::seconds;
};

/// Where a test entry's predictions go, relative to the predictions root:
/// the entry's path with the physiology directory swapped for annotations.
std::filesystem::path prediction_relative_path(const DatasetIndex& index, const DatasetEntry& entry);

void write_prediction_csv(const PredictionTrack& track, const std::filesystem::path& path);

/// Loaded recording features and labels for one dataset entry.
struct FileData {
  features::FeatureMatrix features;
  std::vector<double> valence;  // empty when the entry has no annotations
  std::vector<double> arousal;
  corpus::TimeUnit time_unit = corpus::TimeUnit::seconds;
};

/// Thread-safe, per-run memo of extracted features keyed by physiology path.
class FeatureCache {
 public:
  explicit FeatureCache(features::WindowConfig cfg) : cfg_(cfg) {}
  std::shared_ptr<const FileData> get(const DatasetEntry& entry);

 private:
  features::WindowConfig cfg_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const FileData>> cache_;
};

/// Feature rows of several files stacked, with the trailing `validation_fraction`
/// of each file flagged for ensemble selection.
struct TrainingSet {
  learners::Matrix X;
  std::vector<double> valence;
  std::vector<double> arousal;
  std::vector<std::uint8_t> is_validation;
  std::vector<std::string> column_names;
};

/// X with one extra trailing column (the chained first-target values).
learners::Matrix append_column(const learners::Matrix& X, std::span<const double> column);

TrainingSet assemble_training_set(const std::vector<std::shared_ptr<const FileData>>& files, double validation_fraction);

struct ModelReport {
  Scenario scenario = Scenario::across_time;
  int fold = 0;
  Target target = Target::valence;
  std::string model_key;
  std::size_t training_files = 0;
  std::size_t training_rows = 0;
  double validation_rmse = 0.0;
  std::vector<std::pair<std::string, double>> weights;  // member kind -> weight
  std::filesystem::path model_path;                    // empty when not saved
};

struct RunResult {
  std::vector<PredictionTrack> predictions;
  std::vector<ModelReport> models;
  std::string manifest_hash;
};

/// Trains and predicts every fold of one scenario. With cfg.output_root set,
/// also writes the fold manifests and (if save_models) the models.
RunResult run_scenario(const RunConfig& cfg, const DatasetIndex& index, Scenario scenario, FeatureCache& cache);

/// Runs every configured scenario and writes predictions, fold manifests,
/// models (optional) and manifest.json under cfg.output_root.
/// `config_echo` is stored verbatim in the manifest and hashed.
RunResult run(const RunConfig& cfg, const DatasetIndex& index, const std::map<std::string, std::string>& config_echo);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown (the one from the lowest index).
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace affectfuse::pipeline

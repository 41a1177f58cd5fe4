#pragma once

#include "affectfuse/corpus.hpp"
#include "affectfuse/pipeline.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace affectfuse::eval {

using corpus::Scenario;

/// sqrt(mean((pred - truth)^2)). LengthMismatch / Empty.
double rmse(std::span<const double> pred, std::span<const double> truth);

struct FileScore {
  Scenario scenario = Scenario::across_time;
  int fold = 0;
  int subject_id = 0;
  int video_id = 0;
  double rmse_valence = 0.0;
  double rmse_arousal = 0.0;
};

/// Mean and population SD of the child values.
struct Stat {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

Stat summarize(std::span<const double> values);  // Empty

struct FoldScore {
  Scenario scenario = Scenario::across_time;
  int fold = 0;
  Stat valence;  // over file RMSEs
  Stat arousal;
};

struct ScenarioScore {
  Scenario scenario = Scenario::across_time;
  Stat valence;  // over fold means
  Stat arousal;
};

struct ScoreTree {
  std::vector<FileScore> files;
  std::vector<FoldScore> folds;          // ordered by (scenario, fold)
  std::vector<ScenarioScore> scenarios;  // ordered by scenario
  double overall = 0.0;                  // mean over (scenario, target) values
  double overall_per_scenario = 0.0;     // mean over scenarios of the per-target mean
};

/// Folds and scenarios are taken from the file scores; `expected_folds`
/// (if non-empty) must each have at least one file (EmptyFold).
ScoreTree aggregate_scores(std::vector<FileScore> files, const std::vector<std::pair<Scenario, int>>& expected_folds = {});

/// Scores every labelled test entry of the given scenarios (default: those
/// with a scenario directory under predictions_root) against its prediction
/// file. Missing predictions are IoError; misaligned timestamps SchemaMismatch.
ScoreTree score_predictions(const corpus::DatasetIndex& index, const std::filesystem::path& predictions_root,
                            std::vector<Scenario> scenarios = {});

void write_file_scores_csv(const ScoreTree& tree, const std::filesystem::path& path);
/// Scenario, Fold, Arousal RMSE, Arousal STD, Valence RMSE, Valence STD; fold
/// rows, then a "Scenario level" row per scenario, then the overall rows.
void write_summary_csv(const ScoreTree& tree, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Lag sweep

inline const std::vector<std::string> kLagSubsets = {"ALL", "BVP", "ECG", "EMG_coru", "EMG_trap",
                                                     "EMG_zygo", "GSR", "RSP", "SKT"};
/// 0, 0.005, ..., 0.05
std::vector<double> default_lag_delays();

/// Column indices of a signal subset (Table I block plus raw context of the
/// channel). "ALL" selects everything. UnknownKind for other names.
std::vector<std::size_t> subset_columns(const std::vector<std::string>& column_names, std::string_view subset);

struct LagSweepOptions {
  Scenario scenario = Scenario::across_time;
  int fold = 0;
  std::vector<std::string> subsets = kLagSubsets;
  std::vector<double> delays = default_lag_delays();
  double test_fraction = 0.2;  // trailing share of each file held out
  int smoothing = 1;           // post-smoothing of held-out predictions
};

struct LagTable {
  std::vector<double> delays;
  std::vector<std::string> subsets;
  std::vector<std::vector<double>> rmse;  // [delay][subset]
  std::vector<std::size_t> best_row;      // per subset: row of the minimum (first on ties)
};

/// Fixed temporal split over the training entries of one fold: each file's
/// leading (1 - test_fraction) trains a pooled ensemble per target, its tail
/// is predicted. Returns the mean over files of the held-out RMSE, averaged
/// over both targets.
double temporal_split_rmse(const pipeline::RunConfig& cfg, const std::vector<features::FeatureMatrix>& matrices,
                           const std::vector<const pipeline::FileData*>& labels, std::span<const std::size_t> columns,
                           double test_fraction, int smoothing, std::uint64_t seed);

/// Seed used for a subset's cell; identical across delays.
std::uint64_t lag_seed(std::uint64_t run_seed, std::string_view subset);

LagTable lag_sweep(const pipeline::RunConfig& cfg, const corpus::DatasetIndex& index, const LagSweepOptions& opts);

/// Delay column then one column per subset; minima suffixed with '*'.
void write_lag_table_csv(const LagTable& table, const std::filesystem::path& path);
/// subset, best delay, rmse.
void write_lag_minima_csv(const LagTable& table, const std::filesystem::path& path);

}  // namespace affectfuse::eval

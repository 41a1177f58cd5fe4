#pragma once

#include "affectfuse/corpus.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace affectfuse::learners {

using corpus::Target;

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  /// Rows picked by index, in the given order.
  Matrix take_rows(std::span<const std::size_t> idx) const;
  /// Columns picked by index, in the given order.
  Matrix take_cols(std::span<const std::size_t> idx) const;
  /// Appends rows of `other` (widths must match).
  void append(const Matrix& other);
};

enum class ModelKind { knn_uniform, knn_distance, random_forest, extra_trees, gradient_boosted_trees, ridge_linear };
inline constexpr std::array<ModelKind, 6> kAllKinds = {ModelKind::knn_uniform,  ModelKind::knn_distance,
                                                       ModelKind::random_forest, ModelKind::extra_trees,
                                                       ModelKind::gradient_boosted_trees, ModelKind::ridge_linear};

std::string_view kind_name(ModelKind k);
ModelKind parse_model_kind(std::string_view name);  // UnknownKind

struct LearnerParams {
  int knn_k = 5;
  int forest_trees = 100;
  int forest_max_depth = 12;
  int forest_min_leaf = 5;
  double rf_max_features = 1.0 / 3.0;  // fraction of columns tried per split
  double et_max_features = 1.0;
  int gbt_rounds = 200;
  int gbt_max_depth = 3;
  int gbt_min_leaf = 5;
  double gbt_learning_rate = 0.1;
  double ridge_lambda = 1.0;
  int max_bins = 64;

  void validate(ModelKind kind) const;  // InvalidArgument
};

namespace detail {
struct Fitted;
}

/// A fitted base regressor. Immutable and shareable.
class TrainedModel {
 public:
  TrainedModel() = default;

  ModelKind kind() const noexcept { return kind_; }
  std::size_t feature_width() const noexcept { return width_; }
  Target target() const noexcept { return target_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const LearnerParams& params() const noexcept { return params_; }

  /// ShapeMismatch if X.cols != feature_width().
  std::vector<double> predict(const Matrix& X) const;

  /// Linear coefficients in input units (ridge only; empty otherwise).
  std::vector<double> coefficients() const;
  double intercept() const;

 private:
  friend TrainedModel train_base(ModelKind, const LearnerParams&, const Matrix&, std::span<const double>, Target,
                                 std::uint64_t);
  friend struct ModelCodec;
  ModelKind kind_ = ModelKind::ridge_linear;
  LearnerParams params_;
  std::size_t width_ = 0;
  Target target_ = Target::valence;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const detail::Fitted> fitted_;
};

/// Fits one base learner. knn and ridge standardise columns on the training
/// set; trees see raw values. Deterministic for fixed (data, params, seed).
TrainedModel train_base(ModelKind kind, const LearnerParams& params, const Matrix& X, std::span<const double> y,
                        Target target = Target::valence, std::uint64_t seed = 0);

struct EnsembleModel {
  std::vector<TrainedModel> members;
  std::vector<double> weights;  // selection counts / total
  double validation_rmse = 0.0;
  std::vector<double> member_validation_rmse;

  std::size_t feature_width() const;
  /// Weighted mean of member predictions (zero-weight members skipped).
  std::vector<double> predict(const Matrix& X) const;
};

/// Forward selection with replacement: start from the best single member, then
/// `iterations` times add the member that minimises validation RMSE of the
/// running mean. Returns the best prefix seen. Ties go to the lowest index.
EnsembleModel fit_greedy_weighted_ensemble(std::vector<TrainedModel> members, const Matrix& X_val,
                                           std::span<const double> y_val, int iterations = 25);

/// Same selection on precomputed validation predictions (one vector per member).
/// Returns selection counts per member and the selected ensemble's RMSE.
struct Selection {
  std::vector<int> counts;
  double rmse = 0.0;
  std::vector<double> member_rmse;
};
Selection greedy_select(const std::vector<std::vector<double>>& member_predictions, std::span<const double> y_val,
                        int iterations);

struct EnsembleOptions {
  std::vector<ModelKind> roster{kAllKinds.begin(), kAllKinds.end()};
  LearnerParams params;
  int iterations = 25;
  bool refit_on_all = true;  // refit selected members on train + validation rows
};

/// Fits the roster on the rows where is_validation == 0, selects weights on
/// the rest, then (optionally) refits the selected members on every row.
EnsembleModel train_ensemble(const EnsembleOptions& opts, const Matrix& X, std::span<const double> y,
                             std::span<const std::uint8_t> is_validation, Target target, std::uint64_t seed);

/// Stable hash of a feature schema (column names in order).
std::string feature_schema_hash(const std::vector<std::string>& column_names);

/// Versioned CBOR encoding with seed, hyperparameters and schema hash.
std::vector<std::uint8_t> encode_model(const EnsembleModel& model, const std::string& schema_hash);
/// SchemaMismatch if the stored hash differs from `expected_schema_hash`.
EnsembleModel decode_model(std::span<const std::uint8_t> bytes, const std::string& expected_schema_hash);

void save_model(const EnsembleModel& model, const std::string& schema_hash, const std::filesystem::path& path);
EnsembleModel load_model(const std::filesystem::path& path, const std::string& expected_schema_hash);

}  // namespace affectfuse::learners

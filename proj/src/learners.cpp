#include "affectfuse/learners.hpp"

#include "affectfuse/error.hpp"
#include "csv.hpp"
#include "hash.hpp"
#include "rng.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace affectfuse::learners {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Matrix

Matrix Matrix::take_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols), cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * cols));
  return out;
}

Matrix Matrix::take_cols(std::span<const std::size_t> idx) const {
  Matrix out(rows, idx.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < idx.size(); ++j) out(r, j) = (*this)(r, idx[j]);
  return out;
}

void Matrix::append(const Matrix& other) {
  if (rows == 0 && cols == 0) {
    *this = other;
    return;
  }
  if (other.cols != cols) throw Error(Errc::shape_mismatch, fmt::format("append: width {} != {}", other.cols, cols));
  data.insert(data.end(), other.data.begin(), other.data.end());
  rows += other.rows;
}

// ---------------------------------------------------------------------------
// Kinds and parameters

std::string_view kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::knn_uniform: return "knn_uniform";
    case ModelKind::knn_distance: return "knn_distance";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::extra_trees: return "extra_trees";
    case ModelKind::gradient_boosted_trees: return "gradient_boosted_trees";
    case ModelKind::ridge_linear: return "ridge_linear";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : kAllKinds)
    if (kind_name(k) == name) return k;
  throw Error(Errc::unknown_kind, fmt::format("unknown model kind '{}'", name));
}

void LearnerParams::validate(ModelKind kind) const {
  auto fail = [&](std::string_view what) {
    throw Error(Errc::invalid_argument, fmt::format("{}: {}", kind_name(kind), what));
  };
  switch (kind) {
    case ModelKind::knn_uniform:
    case ModelKind::knn_distance:
      if (knn_k < 1) fail("k must be >= 1");
      break;
    case ModelKind::random_forest:
    case ModelKind::extra_trees:
      if (forest_trees < 1) fail("trees must be >= 1");
      if (forest_max_depth < 1) fail("depth must be >= 1");
      if (forest_min_leaf < 1) fail("min_leaf must be >= 1");
      if (!(rf_max_features > 0.0 && rf_max_features <= 1.0)) fail("rf_max_features must be in (0, 1]");
      if (!(et_max_features > 0.0 && et_max_features <= 1.0)) fail("et_max_features must be in (0, 1]");
      break;
    case ModelKind::gradient_boosted_trees:
      if (gbt_rounds < 1) fail("rounds must be >= 1");
      if (gbt_max_depth < 1) fail("depth must be >= 1");
      if (gbt_min_leaf < 1) fail("min_leaf must be >= 1");
      if (!(gbt_learning_rate > 0.0 && gbt_learning_rate <= 1.0)) fail("learning_rate must be in (0, 1]");
      break;
    case ModelKind::ridge_linear:
      if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) fail("lambda must be >= 0");
      break;
  }
  if (kind == ModelKind::random_forest || kind == ModelKind::gradient_boosted_trees)
    if (max_bins < 2 || max_bins > 256) fail("max_bins must be in [2, 256]");
}

namespace {

json params_to_json(const LearnerParams& p) {
  return {{"knn_k", p.knn_k},
          {"forest_trees", p.forest_trees},
          {"forest_max_depth", p.forest_max_depth},
          {"forest_min_leaf", p.forest_min_leaf},
          {"rf_max_features", p.rf_max_features},
          {"et_max_features", p.et_max_features},
          {"gbt_rounds", p.gbt_rounds},
          {"gbt_max_depth", p.gbt_max_depth},
          {"gbt_min_leaf", p.gbt_min_leaf},
          {"gbt_learning_rate", p.gbt_learning_rate},
          {"ridge_lambda", p.ridge_lambda},
          {"max_bins", p.max_bins}};
}

LearnerParams params_from_json(const json& j) {
  LearnerParams p;
  p.knn_k = j.at("knn_k");
  p.forest_trees = j.at("forest_trees");
  p.forest_max_depth = j.at("forest_max_depth");
  p.forest_min_leaf = j.at("forest_min_leaf");
  p.rf_max_features = j.at("rf_max_features");
  p.et_max_features = j.at("et_max_features");
  p.gbt_rounds = j.at("gbt_rounds");
  p.gbt_max_depth = j.at("gbt_max_depth");
  p.gbt_min_leaf = j.at("gbt_min_leaf");
  p.gbt_learning_rate = j.at("gbt_learning_rate");
  p.ridge_lambda = j.at("ridge_lambda");
  p.max_bins = j.at("max_bins");
  return p;
}

// Mean computed as x0 + mean(x - x0): exact for constant input.
template <typename Get>
double shifted_mean(std::size_t n, Get get) {
  const double x0 = get(0);
  long double acc = 0.0L;
  for (std::size_t i = 1; i < n; ++i) acc += static_cast<long double>(get(i)) - x0;
  return x0 + static_cast<double>(acc / static_cast<long double>(n));
}

double rmse_of(std::span<const double> p, std::span<const double> y) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double d = static_cast<long double>(p[i]) - y[i];
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc / static_cast<long double>(y.size())));
}

struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const Matrix& X) {
    Standardizer s;
    s.mean.resize(X.cols);
    s.scale.resize(X.cols);
    for (std::size_t c = 0; c < X.cols; ++c) {
      const double m = shifted_mean(X.rows, [&](std::size_t r) { return X(r, c); });
      long double ss = 0.0L;
      for (std::size_t r = 0; r < X.rows; ++r) {
        const long double d = X(r, c) - m;
        ss += d * d;
      }
      const double sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(X.rows)));
      s.mean[c] = m;
      s.scale[c] = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& X) const {
    Matrix Z(X.rows, X.cols);
    for (std::size_t r = 0; r < X.rows; ++r)
      for (std::size_t c = 0; c < X.cols; ++c) Z(r, c) = (X(r, c) - mean[c]) / scale[c];
    return Z;
  }

  json to_json() const { return {{"mean", mean}, {"scale", scale}}; }
  static Standardizer from_json(const json& j) {
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    return s;
  }
};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> as_eigen(const Matrix& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Fitted state

namespace detail {

struct Fitted {
  virtual ~Fitted() = default;
  virtual std::vector<double> predict(const Matrix& X) const = 0;
  virtual json to_json() const = 0;
};

}  // namespace detail

namespace {

using detail::Fitted;

struct KnnFitted final : Fitted {
  Standardizer standardizer;
  Matrix Z;
  std::vector<double> y;
  std::vector<double> sqnorm;
  int k = 5;
  bool distance_weighted = false;

  void finish() {
    sqnorm.resize(Z.rows);
    for (std::size_t r = 0; r < Z.rows; ++r) {
      double s = 0.0;
      for (double v : Z.row(r)) s += v * v;
      sqnorm[r] = s;
    }
  }

  std::vector<double> predict(const Matrix& X) const override {
    const Matrix T = standardizer.apply(X);
    const std::size_t n = Z.rows;
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    std::vector<double> out(T.rows);
    const auto Ze = as_eigen(Z);
    constexpr std::size_t kBlock = 256;
    std::vector<std::size_t> order(n);
    std::vector<double> d2(n);
    for (std::size_t b0 = 0; b0 < T.rows; b0 += kBlock) {
      const std::size_t b1 = std::min(T.rows, b0 + kBlock);
      const RowMajor Tb = as_eigen(T).middleRows(static_cast<Eigen::Index>(b0), static_cast<Eigen::Index>(b1 - b0));
      const RowMajor G = Tb * Ze.transpose();
      for (std::size_t i = b0; i < b1; ++i) {
        double tn = 0.0;
        for (double v : T.row(i)) tn += v * v;
        for (std::size_t j = 0; j < n; ++j) {
          const double raw = tn + sqnorm[j] - 2.0 * G(static_cast<Eigen::Index>(i - b0), static_cast<Eigen::Index>(j));
          // Cancellation leaves ~1e-15 relative residue for identical rows.
          d2[j] = raw <= 1e-12 * (tn + sqnorm[j]) ? 0.0 : raw;
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                          [&](std::size_t a, std::size_t b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
        const double y0 = y[order[0]];
        if (!distance_weighted) {
          long double acc = 0.0L;
          for (std::size_t q = 1; q < kk; ++q) acc += static_cast<long double>(y[order[q]]) - y0;
          out[i] = y0 + static_cast<double>(acc / static_cast<long double>(kk));
          continue;
        }
        std::size_t exact = 0;
        long double exact_acc = 0.0L;
        for (std::size_t q = 0; q < kk && d2[order[q]] == 0.0; ++q, ++exact) exact_acc += static_cast<long double>(y[order[q]]) - y0;
        if (exact > 0) {
          out[i] = y0 + static_cast<double>(exact_acc / static_cast<long double>(exact));
          continue;
        }
        long double wsum = 0.0L, acc = 0.0L;
        for (std::size_t q = 0; q < kk; ++q) {
          const long double w = 1.0L / std::sqrt(static_cast<long double>(d2[order[q]]));
          wsum += w;
          acc += w * (static_cast<long double>(y[order[q]]) - y0);
        }
        out[i] = y0 + static_cast<double>(acc / wsum);
      }
    }
    return out;
  }

  json to_json() const override {
    return {{"standardizer", standardizer.to_json()}, {"rows", Z.rows}, {"cols", Z.cols}, {"z", Z.data},
            {"y", y},                                 {"k", k},         {"distance_weighted", distance_weighted}};
  }

  static std::shared_ptr<const Fitted> from_json(const json& j) {
    auto f = std::make_shared<KnnFitted>();
    f->standardizer = Standardizer::from_json(j.at("standardizer"));
    f->Z.rows = j.at("rows");
    f->Z.cols = j.at("cols");
    f->Z.data = j.at("z").get<std::vector<double>>();
    f->y = j.at("y").get<std::vector<double>>();
    f->k = j.at("k");
    f->distance_weighted = j.at("distance_weighted");
    f->finish();
    return f;
  }
};

struct RidgeFitted final : Fitted {
  Standardizer standardizer;
  std::vector<double> beta;  // standardised units
  double y_mean = 0.0;

  std::vector<double> predict(const Matrix& X) const override {
    std::vector<double> out(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) {
      long double acc = 0.0L;
      for (std::size_t c = 0; c < X.cols; ++c)
        acc += static_cast<long double>(beta[c]) * ((X(r, c) - standardizer.mean[c]) / standardizer.scale[c]);
      out[r] = y_mean + static_cast<double>(acc);
    }
    return out;
  }

  json to_json() const override {
    return {{"standardizer", standardizer.to_json()}, {"beta", beta}, {"y_mean", y_mean}};
  }

  static std::shared_ptr<const Fitted> from_json(const json& j) {
    auto f = std::make_shared<RidgeFitted>();
    f->standardizer = Standardizer::from_json(j.at("standardizer"));
    f->beta = j.at("beta").get<std::vector<double>>();
    f->y_mean = j.at("y_mean");
    return f;
  }
};

// ---------------------------------------------------------------------------
// Trees

struct Tree {
  std::vector<int> feature;  // -1 for leaves
  std::vector<double> threshold;
  std::vector<int> left, right;
  std::vector<double> value;

  int add_leaf(double v) {
    feature.push_back(-1);
    threshold.push_back(0.0);
    left.push_back(-1);
    right.push_back(-1);
    value.push_back(v);
    return static_cast<int>(value.size()) - 1;
  }

  double eval(std::span<const double> x) const {
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
      const auto i = static_cast<std::size_t>(node);
      node = x[static_cast<std::size_t>(feature[i])] < threshold[i] ? left[i] : right[i];
    }
    return value[static_cast<std::size_t>(node)];
  }

  json to_json() const {
    return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
  }
  static Tree from_json(const json& j) {
    Tree t;
    t.feature = j.at("feature").get<std::vector<int>>();
    t.threshold = j.at("threshold").get<std::vector<double>>();
    t.left = j.at("left").get<std::vector<int>>();
    t.right = j.at("right").get<std::vector<int>>();
    t.value = j.at("value").get<std::vector<double>>();
    return t;
  }
};

/// Per-column quantile bins; split candidates are midpoints between distinct values.
struct Binned {
  std::size_t rows = 0, cols = 0;
  std::vector<std::vector<double>> thresholds;  // per column, ascending
  std::vector<std::uint8_t> codes;              // column-major

  std::uint8_t code(std::size_t c, std::size_t r) const { return codes[c * rows + r]; }

  static Binned build(const Matrix& X, int max_bins) {
    Binned b;
    b.rows = X.rows;
    b.cols = X.cols;
    b.thresholds.resize(X.cols);
    b.codes.resize(X.rows * X.cols);
    std::vector<double> col(X.rows);
    for (std::size_t c = 0; c < X.cols; ++c) {
      for (std::size_t r = 0; r < X.rows; ++r) col[r] = X(r, c);
      std::vector<double> u = col;
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      auto& th = b.thresholds[c];
      const auto bins = static_cast<std::size_t>(max_bins);
      if (u.size() <= bins) {
        for (std::size_t i = 1; i < u.size(); ++i) th.push_back(u[i - 1] + 0.5 * (u[i] - u[i - 1]));
      } else {
        for (std::size_t i = 1; i < bins; ++i) {
          const std::size_t idx = i * u.size() / bins;
          const double t = u[idx - 1] + 0.5 * (u[idx] - u[idx - 1]);
          if (th.empty() || t > th.back()) th.push_back(t);
        }
      }
      for (std::size_t r = 0; r < X.rows; ++r)
        b.codes[c * X.rows + r] =
            static_cast<std::uint8_t>(std::upper_bound(th.begin(), th.end(), col[r]) - th.begin());
    }
    return b;
  }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  std::size_t bin = 0;  // histogram splits: left iff code <= bin
  double gain = 0.0;
};

struct TreeLimits {
  int max_depth = 1;
  std::size_t min_leaf = 1;
};

double gain_of(long double sl, std::size_t nl, long double sr, std::size_t nr) {
  return static_cast<double>(sl * sl / static_cast<long double>(nl) + sr * sr / static_cast<long double>(nr));
}

std::vector<std::size_t> sample_features(std::size_t cols, double fraction, std::mt19937_64* rng) {
  std::vector<std::size_t> f(cols);
  std::iota(f.begin(), f.end(), std::size_t{0});
  if (fraction >= 1.0 || !rng) return f;
  const std::size_t m = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(fraction * static_cast<double>(cols))), 1, cols);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cols - 1);
    std::swap(f[i], f[pick(*rng)]);
  }
  f.resize(m);
  std::sort(f.begin(), f.end());
  return f;
}

/// Grows one tree on `target` over the rows in `idx` (duplicates allowed).
/// Histogram splits when `extra` is false; random thresholds on raw values
/// (column-major `raw`) when true.
Tree grow_tree(const Binned& bins, const std::vector<double>* raw, const std::vector<double>& target,
               std::vector<std::uint32_t> idx, TreeLimits lim, double feature_fraction, std::mt19937_64* rng,
               bool extra) {
  Tree tree;
  struct Task {
    int node;
    std::size_t begin, end;
    int depth;
  };
  std::vector<Task> stack;
  const std::size_t nrows = bins.rows;

  auto node_value = [&](std::size_t b, std::size_t e) {
    return shifted_mean(e - b, [&](std::size_t i) { return target[idx[b + i]]; });
  };

  tree.add_leaf(node_value(0, idx.size()));
  stack.push_back({0, 0, idx.size(), 0});
  std::vector<long double> hsum;
  std::vector<std::size_t> hcnt;

  while (!stack.empty()) {
    const Task t = stack.back();
    stack.pop_back();
    const std::size_t n = t.end - t.begin;
    if (t.depth >= lim.max_depth || n < 2 * lim.min_leaf) continue;
    const double mean = tree.value[static_cast<std::size_t>(t.node)];
    long double total = 0.0L, sq = 0.0L;
    bool constant = true;
    const double first = target[idx[t.begin]];
    for (std::size_t i = t.begin; i < t.end; ++i) {
      const long double d = static_cast<long double>(target[idx[i]]) - mean;
      total += d;
      sq += d * d;
      constant = constant && target[idx[i]] == first;
    }
    if (constant) continue;
    const double parent = static_cast<double>(total * total / static_cast<long double>(n));
    SplitChoice best;
    best.gain = parent + 1e-12 * static_cast<double>(sq);

    const auto features = sample_features(bins.cols, feature_fraction, rng);
    for (std::size_t f : features) {
      if (!extra) {
        const auto& th = bins.thresholds[f];
        if (th.empty()) continue;
        const std::size_t nb = th.size() + 1;
        hsum.assign(nb, 0.0L);
        hcnt.assign(nb, 0);
        for (std::size_t i = t.begin; i < t.end; ++i) {
          const auto c = bins.code(f, idx[i]);
          hsum[c] += static_cast<long double>(target[idx[i]]) - mean;
          ++hcnt[c];
        }
        long double sl = 0.0L;
        std::size_t nl = 0;
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          sl += hsum[b];
          nl += hcnt[b];
          if (nl < lim.min_leaf) continue;
          if (n - nl < lim.min_leaf) break;
          const double g = gain_of(sl, nl, total - sl, n - nl);
          if (g > best.gain) best = {static_cast<int>(f), th[b], b, g};
        }
      } else {
        const double* col = raw->data() + f * nrows;
        double lo = col[idx[t.begin]], hi = lo;
        for (std::size_t i = t.begin; i < t.end; ++i) {
          lo = std::min(lo, col[idx[i]]);
          hi = std::max(hi, col[idx[i]]);
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double draw = u(*rng);
        if (!(hi > lo)) continue;
        double thr = lo + draw * (hi - lo);
        if (!(thr > lo)) thr = std::nextafter(lo, hi);
        long double sl = 0.0L;
        std::size_t nl = 0;
        for (std::size_t i = t.begin; i < t.end; ++i)
          if (col[idx[i]] < thr) {
            sl += static_cast<long double>(target[idx[i]]) - mean;
            ++nl;
          }
        if (nl < lim.min_leaf || n - nl < lim.min_leaf) continue;
        const double g = gain_of(sl, nl, total - sl, n - nl);
        if (g > best.gain) best = {static_cast<int>(f), thr, 0, g};
      }
    }
    if (best.feature < 0) continue;

    const auto f = static_cast<std::size_t>(best.feature);
    auto goes_left = [&](std::uint32_t r) {
      return extra ? (*raw)[f * nrows + r] < best.threshold : bins.code(f, r) <= best.bin;
    };
    const auto mid = static_cast<std::size_t>(
        std::stable_partition(idx.begin() + static_cast<std::ptrdiff_t>(t.begin),
                              idx.begin() + static_cast<std::ptrdiff_t>(t.end), goes_left) -
        idx.begin());
    const int l = tree.add_leaf(node_value(t.begin, mid));
    const int r = tree.add_leaf(node_value(mid, t.end));
    const auto ni = static_cast<std::size_t>(t.node);
    tree.feature[ni] = best.feature;
    tree.threshold[ni] = best.threshold;
    tree.left[ni] = l;
    tree.right[ni] = r;
    stack.push_back({r, mid, t.end, t.depth + 1});
    stack.push_back({l, t.begin, mid, t.depth + 1});
  }
  return tree;
}

struct ForestFitted final : Fitted {
  std::vector<Tree> trees;

  std::vector<double> predict(const Matrix& X) const override {
    std::vector<double> out(X.rows);
    std::vector<double> v(trees.size());
    for (std::size_t r = 0; r < X.rows; ++r) {
      const auto x = X.row(r);
      for (std::size_t t = 0; t < trees.size(); ++t) v[t] = trees[t].eval(x);
      out[r] = shifted_mean(v.size(), [&](std::size_t i) { return v[i]; });
    }
    return out;
  }

  json to_json() const override {
    json a = json::array();
    for (const auto& t : trees) a.push_back(t.to_json());
    return {{"trees", a}};
  }

  static std::shared_ptr<const Fitted> from_json(const json& j) {
    auto f = std::make_shared<ForestFitted>();
    for (const auto& t : j.at("trees")) f->trees.push_back(Tree::from_json(t));
    return f;
  }
};

struct BoostedFitted final : Fitted {
  double init = 0.0;
  double learning_rate = 0.1;
  std::vector<Tree> trees;

  std::vector<double> predict(const Matrix& X) const override {
    std::vector<double> out(X.rows, init);
    for (std::size_t r = 0; r < X.rows; ++r) {
      const auto x = X.row(r);
      for (const auto& t : trees) out[r] += learning_rate * t.eval(x);
    }
    return out;
  }

  json to_json() const override {
    json a = json::array();
    for (const auto& t : trees) a.push_back(t.to_json());
    return {{"init", init}, {"learning_rate", learning_rate}, {"trees", a}};
  }

  static std::shared_ptr<const Fitted> from_json(const json& j) {
    auto f = std::make_shared<BoostedFitted>();
    f->init = j.at("init");
    f->learning_rate = j.at("learning_rate");
    for (const auto& t : j.at("trees")) f->trees.push_back(Tree::from_json(t));
    return f;
  }
};

std::vector<double> column_major(const Matrix& X) {
  std::vector<double> out(X.rows * X.cols);
  for (std::size_t r = 0; r < X.rows; ++r)
    for (std::size_t c = 0; c < X.cols; ++c) out[c * X.rows + r] = X(r, c);
  return out;
}

std::shared_ptr<const Fitted> fit_knn(const LearnerParams& p, const Matrix& X, std::span<const double> y, bool distance) {
  auto f = std::make_shared<KnnFitted>();
  f->standardizer = Standardizer::fit(X);
  f->Z = f->standardizer.apply(X);
  f->y.assign(y.begin(), y.end());
  f->k = p.knn_k;
  f->distance_weighted = distance;
  f->finish();
  return f;
}

std::shared_ptr<const Fitted> fit_ridge(const LearnerParams& p, const Matrix& X, std::span<const double> y) {
  auto f = std::make_shared<RidgeFitted>();
  f->standardizer = Standardizer::fit(X);
  const Matrix Z = f->standardizer.apply(X);
  f->y_mean = shifted_mean(y.size(), [&](std::size_t i) { return y[i]; });
  Eigen::VectorXd yc(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yc[static_cast<Eigen::Index>(i)] = y[i] - f->y_mean;
  const auto Ze = as_eigen(Z);
  Eigen::VectorXd beta;
  if (yc.isZero(0.0)) {
    beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(X.cols));
  } else if (p.ridge_lambda > 0.0) {
    Eigen::MatrixXd A = Ze.transpose() * Ze;
    A.diagonal().array() += p.ridge_lambda;
    beta = A.ldlt().solve(Ze.transpose() * yc);
  } else {
    beta = Eigen::MatrixXd(Ze).completeOrthogonalDecomposition().solve(yc);
  }
  f->beta.assign(beta.data(), beta.data() + beta.size());
  return f;
}

std::shared_ptr<const Fitted> fit_forest(const LearnerParams& p, const Matrix& X, std::span<const double> y,
                                         std::uint64_t seed, bool extra) {
  auto f = std::make_shared<ForestFitted>();
  const std::vector<double> target(y.begin(), y.end());
  const Binned bins = extra ? Binned{X.rows, X.cols, std::vector<std::vector<double>>(X.cols), {}}
                            : Binned::build(X, p.max_bins);
  const std::vector<double> raw = extra ? column_major(X) : std::vector<double>{};
  const TreeLimits lim{p.forest_max_depth, static_cast<std::size_t>(p.forest_min_leaf)};
  for (int t = 0; t < p.forest_trees; ++t) {
    std::mt19937_64 rng(rng::derive(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::uint32_t> idx(X.rows);
    if (extra) {
      std::iota(idx.begin(), idx.end(), 0u);
    } else {
      std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(X.rows - 1));
      for (auto& i : idx) i = pick(rng);
      std::sort(idx.begin(), idx.end());
    }
    f->trees.push_back(grow_tree(bins, extra ? &raw : nullptr, target, std::move(idx), lim,
                                 extra ? p.et_max_features : p.rf_max_features, &rng, extra));
  }
  return f;
}

std::shared_ptr<const Fitted> fit_boosted(const LearnerParams& p, const Matrix& X, std::span<const double> y) {
  auto f = std::make_shared<BoostedFitted>();
  f->learning_rate = p.gbt_learning_rate;
  f->init = shifted_mean(y.size(), [&](std::size_t i) { return y[i]; });
  const Binned bins = Binned::build(X, p.max_bins);
  std::vector<double> fitted(X.rows, f->init), residual(X.rows);
  const TreeLimits lim{p.gbt_max_depth, static_cast<std::size_t>(p.gbt_min_leaf)};
  std::vector<std::uint32_t> all(X.rows);
  std::iota(all.begin(), all.end(), 0u);
  for (int round = 0; round < p.gbt_rounds; ++round) {
    for (std::size_t i = 0; i < X.rows; ++i) residual[i] = y[i] - fitted[i];
    Tree t = grow_tree(bins, nullptr, residual, all, lim, 1.0, nullptr, false);
    for (std::size_t i = 0; i < X.rows; ++i) fitted[i] += f->learning_rate * t.eval(X.row(i));
    f->trees.push_back(std::move(t));
  }
  return f;
}

void check_training_input(const Matrix& X, std::span<const double> y) {
  if (X.rows != y.size())
    throw Error(Errc::shape_mismatch, fmt::format("{} feature rows but {} targets", X.rows, y.size()));
  if (X.rows < 2) throw Error(Errc::shape_mismatch, fmt::format("need at least 2 training rows, got {}", X.rows));
  if (X.cols == 0) throw Error(Errc::shape_mismatch, "feature matrix has no columns");
  for (std::size_t i = 0; i < X.data.size(); ++i)
    if (!std::isfinite(X.data[i]))
      throw Error(Errc::non_finite_sample, fmt::format("non-finite feature at row {}, column {}", i / X.cols, i % X.cols));
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i])) throw Error(Errc::non_finite_sample, fmt::format("non-finite target at row {}", i));
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainedModel

std::vector<double> TrainedModel::predict(const Matrix& X) const {
  if (!fitted_) throw Error(Errc::invalid_argument, "model is not fitted");
  if (X.cols != width_)
    throw Error(Errc::shape_mismatch, fmt::format("model expects {} features, got {}", width_, X.cols));
  return fitted_->predict(X);
}

std::vector<double> TrainedModel::coefficients() const {
  const auto* r = dynamic_cast<const RidgeFitted*>(fitted_.get());
  if (!r) return {};
  std::vector<double> c(r->beta.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = r->beta[i] / r->standardizer.scale[i];
  return c;
}

double TrainedModel::intercept() const {
  const auto* r = dynamic_cast<const RidgeFitted*>(fitted_.get());
  if (!r) return 0.0;
  double b = r->y_mean;
  for (std::size_t i = 0; i < r->beta.size(); ++i) b -= r->beta[i] / r->standardizer.scale[i] * r->standardizer.mean[i];
  return b;
}

TrainedModel train_base(ModelKind kind, const LearnerParams& params, const Matrix& X, std::span<const double> y,
                        Target target, std::uint64_t seed) {
  params.validate(kind);
  check_training_input(X, y);
  TrainedModel m;
  m.kind_ = kind;
  m.params_ = params;
  m.width_ = X.cols;
  m.target_ = target;
  m.seed_ = seed;
  switch (kind) {
    case ModelKind::knn_uniform: m.fitted_ = fit_knn(params, X, y, false); break;
    case ModelKind::knn_distance: m.fitted_ = fit_knn(params, X, y, true); break;
    case ModelKind::random_forest: m.fitted_ = fit_forest(params, X, y, seed, false); break;
    case ModelKind::extra_trees: m.fitted_ = fit_forest(params, X, y, seed, true); break;
    case ModelKind::gradient_boosted_trees: m.fitted_ = fit_boosted(params, X, y); break;
    case ModelKind::ridge_linear: m.fitted_ = fit_ridge(params, X, y); break;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Ensembles

std::size_t EnsembleModel::feature_width() const { return members.empty() ? 0 : members.front().feature_width(); }

std::vector<double> EnsembleModel::predict(const Matrix& X) const {
  if (members.empty()) throw Error(Errc::empty_members, "ensemble has no members");
  if (weights.size() != members.size())
    throw Error(Errc::shape_mismatch, fmt::format("{} weights for {} members", weights.size(), members.size()));
  std::vector<double> out(X.rows, 0.0);
  bool any = false;
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (weights[m] == 0.0) continue;
    const auto p = members[m].predict(X);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[m] * p[i];
    any = true;
  }
  if (!any) throw Error(Errc::empty_members, "all ensemble weights are zero");
  return out;
}

Selection greedy_select(const std::vector<std::vector<double>>& preds, std::span<const double> y, int iterations) {
  if (preds.empty()) throw Error(Errc::empty_members, "ensemble selection needs at least one member");
  if (y.empty()) throw Error(Errc::empty_input, "validation set is empty");
  for (const auto& p : preds)
    if (p.size() != y.size()) throw Error(Errc::length_mismatch, "member prediction length differs from validation targets");
  const std::size_t M = preds.size(), n = y.size();
  Selection s;
  s.counts.assign(M, 0);
  for (const auto& p : preds) s.member_rmse.push_back(rmse_of(p, y));
  std::size_t first = 0;
  for (std::size_t m = 1; m < M; ++m)
    if (s.member_rmse[m] < s.member_rmse[first]) first = m;
  std::vector<int> counts(M, 0);
  counts[first] = 1;
  std::vector<long double> sum(n);
  for (std::size_t i = 0; i < n; ++i) sum[i] = preds[first][i];
  s.counts = counts;
  s.rmse = s.member_rmse[first];
  int total = 1;
  std::vector<double> trial(n);
  for (int it = 0; it < iterations; ++it) {
    std::size_t pick = 0;
    double pick_rmse = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = static_cast<double>((sum[i] + preds[m][i]) / (total + 1));
      const double r = rmse_of(trial, y);
      if (r < pick_rmse) {
        pick_rmse = r;
        pick = m;
      }
    }
    for (std::size_t i = 0; i < n; ++i) sum[i] += preds[pick][i];
    ++counts[pick];
    ++total;
    if (pick_rmse < s.rmse) {
      s.rmse = pick_rmse;
      s.counts = counts;
    }
  }
  return s;
}

namespace {

EnsembleModel assemble(std::vector<TrainedModel> members, const Selection& sel) {
  EnsembleModel e;
  int total = 0;
  for (int c : sel.counts) total += c;
  for (std::size_t m = 0; m < members.size(); ++m) {
    e.members.push_back(std::move(members[m]));
    e.weights.push_back(static_cast<double>(sel.counts[m]) / total);
  }
  e.member_validation_rmse = sel.member_rmse;
  e.validation_rmse = sel.rmse;
  return e;
}

}  // namespace

EnsembleModel fit_greedy_weighted_ensemble(std::vector<TrainedModel> members, const Matrix& X_val,
                                           std::span<const double> y_val, int iterations) {
  if (members.empty()) throw Error(Errc::empty_members, "ensemble selection needs at least one member");
  if (iterations < 0) throw Error(Errc::invalid_argument, "iterations must be >= 0");
  std::vector<std::vector<double>> preds;
  for (const auto& m : members) preds.push_back(m.predict(X_val));
  const Selection sel = greedy_select(preds, y_val, iterations);
  EnsembleModel e = assemble(std::move(members), sel);
  // Report the RMSE of the weights as applied, and never end up worse than
  // the best single member through rounding.
  e.validation_rmse = rmse_of(e.predict(X_val), y_val);
  const auto best = static_cast<std::size_t>(
      std::min_element(sel.member_rmse.begin(), sel.member_rmse.end()) - sel.member_rmse.begin());
  if (e.validation_rmse > sel.member_rmse[best]) {
    std::fill(e.weights.begin(), e.weights.end(), 0.0);
    e.weights[best] = 1.0;
    e.validation_rmse = sel.member_rmse[best];
  }
  return e;
}

EnsembleModel train_ensemble(const EnsembleOptions& opts, const Matrix& X, std::span<const double> y,
                             std::span<const std::uint8_t> is_validation, Target target, std::uint64_t seed) {
  if (opts.roster.empty()) throw Error(Errc::empty_members, "learner roster is empty");
  if (is_validation.size() != X.rows || y.size() != X.rows)
    throw Error(Errc::shape_mismatch, "validation mask / targets do not match feature rows");
  std::vector<std::size_t> fit_rows, val_rows;
  for (std::size_t i = 0; i < X.rows; ++i) (is_validation[i] ? val_rows : fit_rows).push_back(i);
  if (val_rows.empty()) throw Error(Errc::empty_input, "no validation rows for ensemble selection");
  const Matrix Xf = X.take_rows(fit_rows), Xv = X.take_rows(val_rows);
  std::vector<double> yf, yv;
  for (auto i : fit_rows) yf.push_back(y[i]);
  for (auto i : val_rows) yv.push_back(y[i]);

  std::vector<TrainedModel> members;
  for (std::size_t m = 0; m < opts.roster.size(); ++m)
    members.push_back(train_base(opts.roster[m], opts.params, Xf, yf, target, rng::derive(seed, m)));
  EnsembleModel e = fit_greedy_weighted_ensemble(std::move(members), Xv, yv, opts.iterations);

  EnsembleModel out;
  out.validation_rmse = e.validation_rmse;
  for (std::size_t m = 0; m < e.members.size(); ++m) {
    if (e.weights[m] == 0.0) continue;
    out.members.push_back(opts.refit_on_all ? train_base(opts.roster[m], opts.params, X, y, target, rng::derive(seed, m))
                                            : e.members[m]);
    out.weights.push_back(e.weights[m]);
    out.member_validation_rmse.push_back(e.member_validation_rmse[m]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

std::string feature_schema_hash(const std::vector<std::string>& column_names) {
  std::string joined;
  for (const auto& n : column_names) {
    joined += n;
    joined += '\n';
  }
  return hash::sha256_hex(joined);
}

struct ModelCodec {
  static json encode(const TrainedModel& m) {
    return {{"kind", kind_name(m.kind_)},
            {"seed", m.seed_},
            {"feature_width", m.width_},
            {"target", corpus::target_name(m.target_)},
            {"params", params_to_json(m.params_)},
            {"state", m.fitted_->to_json()}};
  }

  static TrainedModel decode(const json& j) {
    TrainedModel m;
    m.kind_ = parse_model_kind(j.at("kind").get<std::string>());
    m.seed_ = j.at("seed");
    m.width_ = j.at("feature_width");
    m.target_ = j.at("target") == "arousal" ? Target::arousal : Target::valence;
    m.params_ = params_from_json(j.at("params"));
    const auto& s = j.at("state");
    switch (m.kind_) {
      case ModelKind::knn_uniform:
      case ModelKind::knn_distance: m.fitted_ = KnnFitted::from_json(s); break;
      case ModelKind::random_forest:
      case ModelKind::extra_trees: m.fitted_ = ForestFitted::from_json(s); break;
      case ModelKind::gradient_boosted_trees: m.fitted_ = BoostedFitted::from_json(s); break;
      case ModelKind::ridge_linear: m.fitted_ = RidgeFitted::from_json(s); break;
    }
    return m;
  }
};

namespace {
constexpr const char* kFormat = "affectfuse-model";
constexpr int kFormatVersion = 1;
}  // namespace

std::vector<std::uint8_t> encode_model(const EnsembleModel& model, const std::string& schema_hash) {
  json members = json::array();
  for (const auto& m : model.members) members.push_back(ModelCodec::encode(m));
  const json j = {{"format", kFormat},
                  {"version", kFormatVersion},
                  {"schema_hash", schema_hash},
                  {"feature_width", model.feature_width()},
                  {"weights", model.weights},
                  {"validation_rmse", model.validation_rmse},
                  {"member_validation_rmse", model.member_validation_rmse},
                  {"members", members}};
  return json::to_cbor(j);
}

EnsembleModel decode_model(std::span<const std::uint8_t> bytes, const std::string& expected_schema_hash) {
  json j;
  try {
    j = json::from_cbor(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(Errc::io_error, fmt::format("model file is not valid CBOR: {}", e.what()));
  }
  if (j.value("format", "") != kFormat || j.value("version", 0) != kFormatVersion)
    throw Error(Errc::schema_mismatch, "unsupported model format or version");
  const std::string stored = j.at("schema_hash");
  if (stored != expected_schema_hash)
    throw Error(Errc::schema_mismatch,
                fmt::format("feature schema hash {} does not match expected {}", stored, expected_schema_hash));
  EnsembleModel e;
  try {
    for (const auto& m : j.at("members")) e.members.push_back(ModelCodec::decode(m));
    e.weights = j.at("weights").get<std::vector<double>>();
    e.validation_rmse = j.at("validation_rmse");
    e.member_validation_rmse = j.at("member_validation_rmse").get<std::vector<double>>();
  } catch (const json::exception& ex) {
    throw Error(Errc::io_error, fmt::format("malformed model file: {}", ex.what()));
  }
  return e;
}

void save_model(const EnsembleModel& model, const std::string& schema_hash, const std::filesystem::path& path) {
  const auto bytes = encode_model(model, schema_hash);
  csv::write_text(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

EnsembleModel load_model(const std::filesystem::path& path, const std::string& expected_schema_hash) {
  const std::string text = csv::read_text(path);
  return decode_model(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), expected_schema_hash);
}

}  // namespace affectfuse::learners

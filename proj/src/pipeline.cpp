#include "affectfuse/pipeline.hpp"

#include "affectfuse/dsp.hpp"
#include "affectfuse/error.hpp"
#include "csv.hpp"
#include "hash.hpp"
#include "rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <set>
#include <thread>

#include "json.hpp"

namespace affectfuse::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string_view label_mode_name(LabelMode m) {
  switch (m) {
    case LabelMode::independent: return "independent";
    case LabelMode::chain_valence_first: return "chain_valence_first";
    case LabelMode::chain_arousal_first: return "chain_arousal_first";
  }
  return "?";
}

LabelMode parse_label_mode(std::string_view s) {
  for (auto m : {LabelMode::independent, LabelMode::chain_valence_first, LabelMode::chain_arousal_first})
    if (label_mode_name(m) == s) return m;
  throw Error(Errc::config_error, fmt::format("unknown label_mode '{}'", s));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::config_error, m); };
  if (scenarios.empty()) fail("no scenario selected");
  if (smoothing < 1) fail(fmt::format("run.smoothing must be >= 1, got {}", smoothing));
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    fail(fmt::format("run.validation_fraction must be in (0, 1), got {}", validation_fraction));
  if (workers < 1) fail(fmt::format("run.workers must be >= 1, got {}", workers));
  if (ensemble.iterations < 0) fail("learners.iterations must be >= 0");
  if (ensemble.roster.empty()) fail("learners.roster is empty");
  try {
    windows.validate();
    for (auto k : ensemble.roster) ensemble.params.validate(k);
  } catch (const Error& e) {
    throw Error(Errc::config_error, e.what());
  }
}

std::vector<double> late_fuse_mean(const std::vector<std::vector<double>>& predictions) {
  if (predictions.empty()) throw Error(Errc::empty_list, "late fusion needs at least one prediction");
  const std::size_t n = predictions.front().size();
  for (const auto& p : predictions)
    if (p.size() != n)
      throw Error(Errc::length_mismatch, fmt::format("prediction lengths differ ({} vs {})", p.size(), n));
  if (predictions.size() == 1) return predictions.front();
  std::vector<double> out(n);
  const double k = static_cast<double>(predictions.size());
  for (std::size_t i = 0; i < n; ++i) {
    // Shifted by the first input so k identical copies return it exactly.
    const double base = predictions[0][i];
    long double acc = 0.0L;
    for (std::size_t m = 1; m < predictions.size(); ++m) acc += static_cast<long double>(predictions[m][i]) - base;
    out[i] = base + static_cast<double>(acc / k);
  }
  return out;
}

std::vector<double> postprocess_track(std::span<const double> raw, int n) {
  auto out = dsp::moving_average(raw, n);
  for (auto& v : out) v = std::clamp(v, corpus::kRatingMin, corpus::kRatingMax);
  return out;
}

fs::path prediction_relative_path(const DatasetIndex& index, const DatasetEntry& entry) {
  return fs::relative(entry.physiology, index.root).parent_path().parent_path() / "annotations" /
         entry.physiology.filename();
}

void write_prediction_csv(const PredictionTrack& track, const fs::path& path) {
  corpus::AnnotationTrack a;
  a.subject_id = track.subject_id;
  a.video_id = track.video_id;
  a.time_unit = track.time_unit;
  a.timestamps = track.timestamps;
  a.valence = track.valence;
  a.arousal = track.arousal;
  corpus::save_annotations(a, path);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const FileData> FeatureCache::get(const DatasetEntry& entry) {
  const std::string key = entry.physiology.string();
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto data = std::make_shared<FileData>();
  try {
    const auto rec = corpus::load_recording(entry.physiology);
    std::vector<double> times;
    if (entry.annotations) {
      auto track = corpus::load_annotations(*entry.annotations);
      corpus::check_pairing(rec, track);
      times = track.timestamps;
      data->valence = std::move(track.valence);
      data->arousal = std::move(track.arousal);
      data->time_unit = track.time_unit;
    } else {
      // Unlabelled test file: 20 Hz grid over the recording.
      for (std::size_t k = 0;; ++k) {
        const double t = rec.t0 + static_cast<double>(k) * corpus::kAnnotationStep;
        if (t > rec.end_time() + 1e-9) break;
        times.push_back(t);
      }
      data->time_unit = rec.time_unit;
    }
    data->features = features::build_feature_frames(rec, times, cfg_);
  } catch (const Error& e) {
    e.rethrow_with(entry.physiology.string());
  }
  std::lock_guard lock(mu_);
  return cache_.emplace(key, std::move(data)).first->second;
}

learners::Matrix append_column(const learners::Matrix& X, std::span<const double> column) {
  if (column.size() != X.rows)
    throw Error(Errc::length_mismatch, fmt::format("column of {} values for {} rows", column.size(), X.rows));
  learners::Matrix out(X.rows, X.cols + 1);
  for (std::size_t r = 0; r < X.rows; ++r) {
    std::copy_n(X.data.begin() + static_cast<std::ptrdiff_t>(r * X.cols), X.cols,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * out.cols));
    out(r, X.cols) = column[r];
  }
  return out;
}

TrainingSet assemble_training_set(const std::vector<std::shared_ptr<const FileData>>& files, double validation_fraction) {
  if (files.empty()) throw Error(Errc::empty_input, "no training files");
  TrainingSet ts;
  ts.column_names = files.front()->features.column_names;
  const std::size_t cols = ts.column_names.size();
  for (const auto& f : files) {
    const auto& m = f->features;
    if (m.column_names != ts.column_names) throw Error(Errc::shape_mismatch, "training files disagree on feature columns");
    if (f->valence.size() != m.rows() || f->arousal.size() != m.rows())
      throw Error(Errc::shape_mismatch,
                  fmt::format("sub_{}_vid_{} has no annotations to train on", m.subject_id, m.video_id));
    const std::size_t n = m.rows();
    std::size_t nv = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
    if (nv == 0 && n >= 2) nv = 1;
    if (nv >= n) nv = n > 1 ? n - 1 : 0;
    ts.X.data.insert(ts.X.data.end(), m.data.begin(), m.data.end());
    ts.X.rows += n;
    ts.valence.insert(ts.valence.end(), f->valence.begin(), f->valence.end());
    ts.arousal.insert(ts.arousal.end(), f->arousal.begin(), f->arousal.end());
    for (std::size_t i = 0; i < n; ++i) ts.is_validation.push_back(i >= n - nv ? 1 : 0);
  }
  ts.X.cols = cols;
  return ts;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  std::vector<std::exception_ptr> errors(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

learners::Matrix to_matrix(const features::FeatureMatrix& m) {
  learners::Matrix X;
  X.rows = m.rows();
  X.cols = m.cols();
  X.data = m.data;
  return X;
}


std::string scenario_dir(Scenario s) { return fmt::format("scenario_{}", static_cast<int>(s)); }

std::string safe_file_name(std::string key) {
  for (auto& c : key)
    if (c == ':' || c == '+' || c == '/') c = '_';
  return key;
}

struct TargetPlan {
  Target first = Target::valence;
  Target second = Target::arousal;
  bool chained = false;
};

TargetPlan plan_for(LabelMode mode) {
  switch (mode) {
    case LabelMode::independent: return {Target::valence, Target::arousal, false};
    case LabelMode::chain_valence_first: return {Target::valence, Target::arousal, true};
    case LabelMode::chain_arousal_first: return {Target::arousal, Target::valence, true};
  }
  return {};
}


}  // namespace

RunResult run_scenario(const RunConfig& cfg, const DatasetIndex& index, Scenario scenario, FeatureCache& cache) {
  const std::string sname = scenario_dir(scenario);
  scenarios::VideoQuadrantMap quadrants;
  if (scenario == Scenario::across_elicitor) quadrants = scenarios::analyze_elicitor_quadrants(index);
  const auto folds = scenarios::build_folds(scenario, index, quadrants);
  const TargetPlan plan = plan_for(cfg.label_mode);
  RunResult result;

  for (const auto& fold : folds) {
    const std::string where = fmt::format("{} fold {}", sname, fold.fold_id);
    const fs::path fold_dir = fs::path(sname) / fmt::format("fold_{}", fold.fold_id);
    if (!cfg.output_root.empty()) scenarios::write_fold_manifest(fold, cfg.output_root / "folds" / (fold_dir.string() + ".json"));

    std::map<std::pair<Target, std::string>, learners::EnsembleModel> models;
    for (Target t : {plan.first, plan.second}) {
      const bool chained = plan.chained && t == plan.second;
      const auto subsets = scenarios::all_training_subsets(fold, t);
      std::vector<learners::EnsembleModel> trained(subsets.size());
      std::vector<ModelReport> reports(subsets.size());
      parallel_for(subsets.size(), cfg.workers, [&](std::size_t i) {
        const auto& s = subsets[i];
        try {
          std::vector<std::shared_ptr<const FileData>> files;
          for (const auto& e : s.entries) files.push_back(cache.get(e));
          const auto ts = assemble_training_set(files, cfg.validation_fraction);
          const auto& y = t == Target::valence ? ts.valence : ts.arousal;
          const auto& first_truth = plan.first == Target::valence ? ts.valence : ts.arousal;
          const learners::Matrix X = chained ? append_column(ts.X, first_truth) : ts.X;
          const std::uint64_t seed = rng::derive(cfg.seed, static_cast<std::uint64_t>(scenario),
                                                 static_cast<std::uint64_t>(fold.fold_id), static_cast<std::uint64_t>(t),
                                                 fnv1a(s.model_key));
          trained[i] = learners::train_ensemble(cfg.ensemble, X, y, ts.is_validation, t, seed);
          auto& r = reports[i];
          r.scenario = scenario;
          r.fold = fold.fold_id;
          r.target = t;
          r.model_key = s.model_key;
          r.training_files = s.entries.size();
          r.training_rows = X.rows;
          r.validation_rmse = trained[i].validation_rmse;
          for (std::size_t m = 0; m < trained[i].members.size(); ++m)
            r.weights.emplace_back(learners::kind_name(trained[i].members[m].kind()), trained[i].weights[m]);
          if (cfg.save_models && !cfg.output_root.empty()) {
            auto names = ts.column_names;
            if (chained) names.push_back(fmt::format("chain_{}", corpus::target_name(plan.first)));
            r.model_path = fs::path("models") / fold_dir / std::string(corpus::target_name(t)) /
                           (safe_file_name(s.model_key) + ".cbor");
            learners::save_model(trained[i], learners::feature_schema_hash(names), cfg.output_root / r.model_path);
          }
        } catch (const Error& e) {
          e.rethrow_with(fmt::format("{} {} model '{}'", where, corpus::target_name(t), s.model_key));
        }
      });
      for (std::size_t i = 0; i < subsets.size(); ++i) {
        models.emplace(std::make_pair(t, subsets[i].model_key), std::move(trained[i]));
        result.models.push_back(std::move(reports[i]));
      }
    }

    std::vector<PredictionTrack> tracks(fold.test.size());
    parallel_for(fold.test.size(), cfg.workers, [&](std::size_t i) {
      const auto& e = fold.test[i];
      try {
        const auto data = cache.get(e);
        const learners::Matrix X = to_matrix(data->features);
        auto& track = tracks[i];
        track.scenario = scenario;
        track.fold = fold.fold_id;
        track.subject_id = e.subject_id;
        track.video_id = e.video_id;
        track.timestamps = data->features.timestamps;
        track.time_unit = data->time_unit;
        track.relative_path = prediction_relative_path(index, e);
        auto predict_target = [&](Target t, const learners::Matrix& input) {
          std::vector<std::vector<double>> raw;
          auto& keys = t == Target::valence ? track.valence_models : track.arousal_models;
          for (const auto& s : scenarios::training_subsets_for_target(fold, t, e)) {
            raw.push_back(models.at({t, s.model_key}).predict(input));
            keys.push_back(s.model_key);
          }
          return postprocess_track(late_fuse_mean(raw), cfg.smoothing);
        };
        auto first = predict_target(plan.first, X);
        auto second = plan.chained ? predict_target(plan.second, append_column(X, first)) : predict_target(plan.second, X);
        (plan.first == Target::valence ? track.valence : track.arousal) = std::move(first);
        (plan.second == Target::valence ? track.valence : track.arousal) = std::move(second);
      } catch (const Error& err) {
        err.rethrow_with(fmt::format("{} test file {}", where, e.file_name()));
      }
    });
    for (auto& t : tracks) result.predictions.push_back(std::move(t));
  }
  return result;
}

RunResult run(const RunConfig& cfg, const DatasetIndex& index, const std::map<std::string, std::string>& config_echo) {
  cfg.validate();
  if (cfg.output_root.empty()) throw Error(Errc::config_error, "paths.output is not set");
  FeatureCache cache(cfg.windows);
  RunResult all;
  for (auto s : cfg.scenarios) {
    auto r = run_scenario(cfg, index, s, cache);
    for (auto& p : r.predictions) all.predictions.push_back(std::move(p));
    for (auto& m : r.models) all.models.push_back(std::move(m));
  }

  ordered_json preds = ordered_json::array();
  for (const auto& p : all.predictions) {
    const fs::path rel = fs::path("predictions") / p.relative_path;
    const fs::path path = cfg.output_root / rel;
    write_prediction_csv(p, path);
    preds.push_back({{"file", rel.generic_string()},
                     {"rows", p.timestamps.size()},
                     {"valence_models", p.valence_models},
                     {"arousal_models", p.arousal_models},
                     {"sha256", hash::sha256_file(path)}});
  }
  ordered_json models = ordered_json::array();
  for (const auto& m : all.models) {
    ordered_json w = ordered_json::object();
    for (const auto& [k, v] : m.weights) w[k] = v;
    ordered_json entry = {{"scenario", corpus::scenario_name(m.scenario)},
                          {"fold", m.fold},
                          {"target", corpus::target_name(m.target)},
                          {"model_key", m.model_key},
                          {"training_files", m.training_files},
                          {"training_rows", m.training_rows},
                          {"validation_rmse", m.validation_rmse},
                          {"weights", w}};
    if (!m.model_path.empty()) {
      entry["model_file"] = m.model_path.generic_string();
      entry["model_sha256"] = hash::sha256_file(cfg.output_root / m.model_path);
    }
    models.push_back(entry);
  }
  ordered_json config = ordered_json::object();
  std::string config_text;
  for (const auto& [k, v] : config_echo) {
    config[k] = v;
    config_text += k + "=" + v + "\n";
  }
  ordered_json manifest = {{"format", "affectfuse-run"},
                           {"version", 1},
                           {"config", config},
                           {"config_hash", hash::sha256_hex(config_text)},
                           {"seed", cfg.seed},
                           {"label_mode", label_mode_name(cfg.label_mode)},
                           {"models", models},
                           {"predictions", preds}};
  all.manifest_hash = hash::sha256_hex(manifest.dump());
  manifest["manifest_hash"] = all.manifest_hash;
  csv::write_text(cfg.output_root / "manifest.json", manifest.dump(2) + "\n");
  return all;
}

}  // namespace affectfuse::pipeline

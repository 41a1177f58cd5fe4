#include "affectfuse/eval.hpp"

#include "affectfuse/error.hpp"
#include "affectfuse/features.hpp"
#include "affectfuse/learners.hpp"
#include "affectfuse/scenarios.hpp"
#include "csv.hpp"
#include "rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace affectfuse::eval {

namespace fs = std::filesystem;

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw Error(Errc::length_mismatch, fmt::format("rmse of {} predictions against {} ratings", pred.size(), truth.size()));
  if (pred.empty()) throw Error(Errc::empty, "rmse of empty vectors");
  long double acc = 0.0L;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const long double d = static_cast<long double>(pred[i]) - static_cast<long double>(truth[i]);
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc / static_cast<long double>(pred.size())));
}

Stat summarize(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::empty, "no values to summarize");
  Stat s;
  s.n = values.size();
  long double sum = 0.0L;
  for (double v : values) sum += v;
  const long double m = sum / static_cast<long double>(s.n);
  long double ss = 0.0L;
  for (double v : values) ss += (v - m) * (v - m);
  s.mean = static_cast<double>(m);
  s.sd = static_cast<double>(std::sqrt(ss / static_cast<long double>(s.n)));
  return s;
}

ScoreTree aggregate_scores(std::vector<FileScore> files, const std::vector<std::pair<Scenario, int>>& expected_folds) {
  if (files.empty() && expected_folds.empty()) throw Error(Errc::empty_fold, "no file scores");
  std::sort(files.begin(), files.end(), [](const FileScore& a, const FileScore& b) {
    return std::tie(a.scenario, a.fold, a.subject_id, a.video_id) < std::tie(b.scenario, b.fold, b.subject_id, b.video_id);
  });
  std::map<std::pair<Scenario, int>, std::pair<std::vector<double>, std::vector<double>>> by_fold;
  for (const auto& [s, f] : expected_folds) by_fold[{s, f}];
  for (const auto& f : files) {
    auto& [v, a] = by_fold[{f.scenario, f.fold}];
    v.push_back(f.rmse_valence);
    a.push_back(f.rmse_arousal);
  }

  ScoreTree tree;
  tree.files = std::move(files);
  std::map<Scenario, std::pair<std::vector<double>, std::vector<double>>> by_scenario;
  for (const auto& [key, vals] : by_fold) {
    if (vals.first.empty())
      throw Error(Errc::empty_fold, fmt::format("{} fold {} has no scored files", corpus::scenario_name(key.first), key.second));
    FoldScore fs_;
    fs_.scenario = key.first;
    fs_.fold = key.second;
    fs_.valence = summarize(vals.first);
    fs_.arousal = summarize(vals.second);
    tree.folds.push_back(fs_);
    by_scenario[key.first].first.push_back(fs_.valence.mean);
    by_scenario[key.first].second.push_back(fs_.arousal.mean);
  }
  std::vector<double> per_target, per_scenario;
  for (const auto& [s, vals] : by_scenario) {
    ScenarioScore sc;
    sc.scenario = s;
    sc.valence = summarize(vals.first);
    sc.arousal = summarize(vals.second);
    tree.scenarios.push_back(sc);
    per_target.push_back(sc.valence.mean);
    per_target.push_back(sc.arousal.mean);
    per_scenario.push_back((sc.valence.mean + sc.arousal.mean) / 2.0);
  }
  tree.overall = summarize(per_target).mean;
  tree.overall_per_scenario = summarize(per_scenario).mean;
  return tree;
}

namespace {

bool same_times(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-6) return false;
  return true;
}

std::string scenario_dir(Scenario s) { return fmt::format("scenario_{}", static_cast<int>(s)); }

}  // namespace

ScoreTree score_predictions(const corpus::DatasetIndex& index, const fs::path& predictions_root, std::vector<Scenario> scenarios) {
  if (scenarios.empty()) {
    for (auto s : corpus::kAllScenarios)
      if (!index.select(s).empty() && fs::is_directory(predictions_root / scenario_dir(s))) scenarios.push_back(s);
    if (scenarios.empty()) throw Error(Errc::empty_input, fmt::format("no predictions under {}", predictions_root.string()));
  }
  std::vector<FileScore> files;
  std::vector<std::pair<Scenario, int>> expected;
  for (auto s : scenarios) {
    for (int fold : index.folds(s)) {
      bool labelled = false;
      for (const auto* e : index.select(s, fold, corpus::Split::test)) {
        if (!e->annotations) continue;
        labelled = true;
        const fs::path pred_path = predictions_root / pipeline::prediction_relative_path(index, *e);
        if (!fs::exists(pred_path)) throw Error(Errc::io_error, fmt::format("missing prediction {}", pred_path.string()));
        try {
          const auto truth = corpus::load_annotations(*e->annotations);
          const auto pred = corpus::load_annotations(pred_path);
          if (!same_times(truth.timestamps, pred.timestamps))
            throw Error(Errc::schema_mismatch, "prediction timestamps do not match the ratings");
          FileScore f;
          f.scenario = s;
          f.fold = fold;
          f.subject_id = e->subject_id;
          f.video_id = e->video_id;
          f.rmse_valence = rmse(pred.valence, truth.valence);
          f.rmse_arousal = rmse(pred.arousal, truth.arousal);
          files.push_back(f);
        } catch (const Error& err) {
          err.rethrow_with(pred_path.string());
        }
      }
      if (labelled) expected.emplace_back(s, fold);
    }
  }
  if (expected.empty()) throw Error(Errc::empty_input, "no labelled test files to score");
  return aggregate_scores(std::move(files), expected);
}

void write_file_scores_csv(const ScoreTree& tree, const fs::path& path) {
  std::string out = "scenario,fold,subject,video,rmse_valence,rmse_arousal\n";
  for (const auto& f : tree.files)
    out += fmt::format("{},{},{},{},{},{}\n", corpus::scenario_name(f.scenario), f.fold, f.subject_id, f.video_id,
                       csv::format_double(f.rmse_valence), csv::format_double(f.rmse_arousal));
  csv::write_text(path, out);
}

void write_summary_csv(const ScoreTree& tree, const fs::path& path) {
  using csv::format_double;
  std::string out = "Scenario,Fold,Arousal RMSE,Arousal STD,Valence RMSE,Valence STD\n";
  for (const auto& sc : tree.scenarios) {
    for (const auto& f : tree.folds)
      if (f.scenario == sc.scenario)
        out += fmt::format("{},{},{},{},{},{}\n", corpus::scenario_name(f.scenario), f.fold, format_double(f.arousal.mean),
                           format_double(f.arousal.sd), format_double(f.valence.mean), format_double(f.valence.sd));
    out += fmt::format("{},Scenario level,{},{},{},{}\n", corpus::scenario_name(sc.scenario), format_double(sc.arousal.mean),
                       format_double(sc.arousal.sd), format_double(sc.valence.mean), format_double(sc.valence.sd));
  }
  out += fmt::format("# overall (mean over scenario x target): {}\n", format_double(tree.overall));
  out += fmt::format("# overall (mean over scenarios of per-target means): {}\n", format_double(tree.overall_per_scenario));
  out += "# STD columns are population standard deviations over the child values\n";
  csv::write_text(path, out);
}

// ---------------------------------------------------------------------------

std::vector<double> default_lag_delays() {
  std::vector<double> d;
  for (int i = 0; i <= 10; ++i) d.push_back(static_cast<double>(i) / 200.0);
  return d;
}

std::vector<std::size_t> subset_columns(const std::vector<std::string>& column_names, std::string_view subset) {
  static const std::map<std::string_view, std::pair<std::string_view, std::string_view>, std::less<>> prefixes = {
      {"BVP", {"bvp_", "ctx_bvp_"}},
      {"ECG", {"ecg_", "ctx_ecg_"}},
      {"EMG_coru", {"emg_coru_", "ctx_emg_coru_"}},
      {"EMG_trap", {"emg_trap_", "ctx_emg_trap_"}},
      {"EMG_zygo", {"emg_zygo_", "ctx_emg_zygo_"}},
      {"GSR", {"eda_", "ctx_gsr_"}},
      {"RSP", {"rsp_", "ctx_rsp_"}},
      {"SKT", {"skt_", "ctx_skt_"}},
  };
  std::vector<std::size_t> cols;
  if (subset == "ALL") {
    cols.resize(column_names.size());
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    return cols;
  }
  const auto it = prefixes.find(subset);
  if (it == prefixes.end()) throw Error(Errc::unknown_kind, fmt::format("unknown signal subset '{}'", subset));
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    const std::string_view n = column_names[c];
    if (n.starts_with(it->second.first) || n.starts_with(it->second.second)) cols.push_back(c);
  }
  if (cols.empty()) throw Error(Errc::empty_input, fmt::format("signal subset '{}' matches no feature columns", subset));
  return cols;
}

std::uint64_t lag_seed(std::uint64_t run_seed, std::string_view subset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : subset) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return rng::derive(run_seed, 0x1a95u, h);
}

namespace {

std::size_t held_out_rows(std::size_t n, double test_fraction) {
  if (n < 3) throw Error(Errc::too_short, fmt::format("{} rows cannot be split in time", n));
  auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  return std::clamp<std::size_t>(k, 1, n - 2);
}

}  // namespace

double temporal_split_rmse(const pipeline::RunConfig& cfg, const std::vector<features::FeatureMatrix>& matrices,
                           const std::vector<const pipeline::FileData*>& labels, std::span<const std::size_t> columns,
                           double test_fraction, int smoothing, std::uint64_t seed) {
  if (matrices.empty()) throw Error(Errc::empty_input, "no files for the temporal split");
  if (matrices.size() != labels.size()) throw Error(Errc::length_mismatch, "feature matrices and labels differ in count");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw Error(Errc::invalid_argument, "test_fraction must be in (0, 1)");

  std::vector<std::shared_ptr<const pipeline::FileData>> train;
  std::vector<learners::Matrix> held_out;
  std::vector<std::size_t> split_at;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const auto& m = matrices[i];
    const auto* l = labels[i];
    if (l->valence.size() != m.rows())
      throw Error(Errc::shape_mismatch, fmt::format("sub_{}_vid_{} needs one rating per feature row", m.subject_id, m.video_id));
    const std::size_t n = m.rows();
    const std::size_t ntrain = n - held_out_rows(n, test_fraction);
    auto f = std::make_shared<pipeline::FileData>();
    learners::Matrix test(n - ntrain, columns.size());
    for (std::size_t c : columns) {
      if (c >= m.cols()) throw Error(Errc::shape_mismatch, "subset column beyond the feature width");
      f->features.column_names.push_back(m.column_names[c]);
    }
    f->features.subject_id = m.subject_id;
    f->features.video_id = m.video_id;
    f->features.timestamps.assign(m.timestamps.begin(), m.timestamps.begin() + static_cast<std::ptrdiff_t>(ntrain));
    f->features.data.reserve(ntrain * columns.size());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < columns.size(); ++j) {
        if (r < ntrain) f->features.data.push_back(m.at(r, columns[j]));
        else test(r - ntrain, j) = m.at(r, columns[j]);
      }
    f->valence.assign(l->valence.begin(), l->valence.begin() + static_cast<std::ptrdiff_t>(ntrain));
    f->arousal.assign(l->arousal.begin(), l->arousal.begin() + static_cast<std::ptrdiff_t>(ntrain));
    train.push_back(std::move(f));
    held_out.push_back(std::move(test));
    split_at.push_back(ntrain);
  }

  const auto ts = pipeline::assemble_training_set(train, cfg.validation_fraction);
  double total = 0.0;
  for (auto t : {corpus::Target::valence, corpus::Target::arousal}) {
    const auto& y = t == corpus::Target::valence ? ts.valence : ts.arousal;
    const auto model = learners::train_ensemble(cfg.ensemble, ts.X, y, ts.is_validation, t,
                                                rng::derive(seed, static_cast<std::uint64_t>(t)));
    double sum = 0.0;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
      const auto pred = pipeline::postprocess_track(model.predict(held_out[i]), smoothing);
      const auto& truth = t == corpus::Target::valence ? labels[i]->valence : labels[i]->arousal;
      sum += rmse(pred, std::span<const double>(truth).subspan(split_at[i]));
    }
    total += sum / static_cast<double>(held_out.size());
  }
  return total / 2.0;
}

LagTable lag_sweep(const pipeline::RunConfig& cfg, const corpus::DatasetIndex& index, const LagSweepOptions& opts) {
  if (opts.subsets.empty() || opts.delays.empty()) throw Error(Errc::empty_input, "lag sweep needs subsets and delays");
  std::vector<const corpus::DatasetEntry*> entries;
  for (const auto* e : index.select(opts.scenario, opts.fold, corpus::Split::train))
    if (e->annotations) entries.push_back(e);
  if (entries.empty())
    throw Error(Errc::empty_input, fmt::format("{} fold {} has no labelled training files",
                                               corpus::scenario_name(opts.scenario), opts.fold));

  pipeline::FeatureCache cache(cfg.windows);
  std::vector<std::shared_ptr<const pipeline::FileData>> data(entries.size());
  pipeline::parallel_for(entries.size(), cfg.workers, [&](std::size_t i) { data[i] = cache.get(*entries[i]); });
  std::vector<const pipeline::FileData*> labels;
  for (const auto& d : data) labels.push_back(d.get());

  std::vector<std::vector<std::size_t>> columns;
  for (const auto& s : opts.subsets) columns.push_back(subset_columns(data.front()->features.column_names, s));

  LagTable table;
  table.delays = opts.delays;
  table.subsets = opts.subsets;
  table.rmse.assign(opts.delays.size(), std::vector<double>(opts.subsets.size(), 0.0));
  for (std::size_t d = 0; d < opts.delays.size(); ++d) {
    std::vector<features::FeatureMatrix> shifted(data.size());
    pipeline::parallel_for(data.size(), cfg.workers, [&](std::size_t i) {
      try {
        shifted[i] = features::shift_features(data[i]->features, opts.delays[d]);
      } catch (const Error& e) {
        e.rethrow_with(entries[i]->physiology.string());
      }
    });
    pipeline::parallel_for(opts.subsets.size(), cfg.workers, [&](std::size_t s) {
      try {
        table.rmse[d][s] = temporal_split_rmse(cfg, shifted, labels, columns[s], opts.test_fraction, opts.smoothing,
                                               lag_seed(cfg.seed, opts.subsets[s]));
      } catch (const Error& e) {
        e.rethrow_with(fmt::format("lag sweep {} at {} s", opts.subsets[s], opts.delays[d]));
      }
    });
  }
  for (std::size_t s = 0; s < opts.subsets.size(); ++s) {
    std::size_t best = 0;
    for (std::size_t d = 1; d < opts.delays.size(); ++d)
      if (table.rmse[d][s] < table.rmse[best][s]) best = d;
    table.best_row.push_back(best);
  }
  return table;
}

void write_lag_table_csv(const LagTable& table, const fs::path& path) {
  std::string out = "delay_s";
  for (const auto& s : table.subsets) out += "," + s;
  out += "\n";
  for (std::size_t d = 0; d < table.delays.size(); ++d) {
    out += fmt::format("{:.3f}", table.delays[d]);
    for (std::size_t s = 0; s < table.subsets.size(); ++s)
      out += fmt::format(",{:.6f}{}", table.rmse[d][s], table.best_row[s] == d ? "*" : "");
    out += "\n";
  }
  csv::write_text(path, out);
}

void write_lag_minima_csv(const LagTable& table, const fs::path& path) {
  std::string out = "subset,best_delay_s,rmse\n";
  for (std::size_t s = 0; s < table.subsets.size(); ++s)
    out += fmt::format("{},{:.3f},{}\n", table.subsets[s], table.delays[table.best_row[s]],
                       csv::format_double(table.rmse[table.best_row[s]][s]));
  csv::write_text(path, out);
}

}  // namespace affectfuse::eval

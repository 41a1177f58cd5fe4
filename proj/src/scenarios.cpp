#include "affectfuse/scenarios.hpp"

#include "affectfuse/error.hpp"
#include "csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace affectfuse::scenarios {

using corpus::kRatingMidpoint;

std::string_view quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::hvha: return "HVHA";
    case Quadrant::lvha: return "LVHA";
    case Quadrant::lvla: return "LVLA";
    case Quadrant::hvla: return "HVLA";
  }
  return "?";
}

Quadrant make_quadrant(bool hv, bool ha) {
  if (hv) return ha ? Quadrant::hvha : Quadrant::hvla;
  return ha ? Quadrant::lvha : Quadrant::lvla;
}

Quadrant VideoQuadrantMap::at(int video_id) const {
  const auto it = quadrant.find(video_id);
  if (it == quadrant.end()) throw Error(Errc::incomplete_index, fmt::format("video {} has no quadrant", video_id));
  return it->second;
}

double quadrant_affinity(const VideoEvidence& e, Quadrant q) {
  const double sv = high_valence(q) ? 1.0 : -1.0;
  const double sa = high_arousal(q) ? 1.0 : -1.0;
  return sv * (e.mean_valence - kRatingMidpoint) + sa * (e.mean_arousal - kRatingMidpoint);
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double prominence(const VideoEvidence& e) {
  return std::hypot(e.mean_valence - kRatingMidpoint, e.mean_arousal - kRatingMidpoint);
}

}  // namespace

VideoQuadrantMap quadrant_meta_analysis(const std::vector<VideoRatings>& ratings,
                                        const std::vector<std::vector<int>>& groups) {
  if (ratings.empty()) throw Error(Errc::empty_input, "quadrant analysis needs at least one annotation track");
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> pooled;
  for (const auto& r : ratings) {
    if (!r.track) throw Error(Errc::invalid_argument, "null annotation track");
    auto& [v, a] = pooled[r.video_id];
    v.insert(v.end(), r.track->valence.begin(), r.track->valence.end());
    a.insert(a.end(), r.track->arousal.begin(), r.track->arousal.end());
  }
  VideoQuadrantMap out;
  for (auto& [video, va] : pooled) {
    auto& [v, a] = va;
    if (v.empty()) throw Error(Errc::empty_input, fmt::format("video {} has no ratings", video));
    // Sort first so the pooled mean does not depend on track order.
    std::sort(v.begin(), v.end());
    std::sort(a.begin(), a.end());
    VideoEvidence e;
    e.samples = v.size();
    long double sv = 0, sa = 0;
    for (double x : v) sv += x;
    for (double x : a) sa += x;
    e.mean_valence = static_cast<double>(sv / static_cast<long double>(v.size()));
    e.mean_arousal = static_cast<double>(sa / static_cast<long double>(a.size()));
    e.median_valence = median(v);
    e.median_arousal = median(a);
    out.evidence[video] = e;
    out.quadrant[video] = make_quadrant(e.mean_valence >= kRatingMidpoint, e.mean_arousal >= kRatingMidpoint);
  }
  if (groups.empty()) return out;
  if (groups.size() != 4)
    throw Error(Errc::invalid_argument, fmt::format("bijective quadrant assignment needs 4 video groups, got {}", groups.size()));

  std::array<const VideoEvidence*, 4> lead{};
  for (std::size_t g = 0; g < 4; ++g) {
    if (groups[g].empty()) throw Error(Errc::empty_input, fmt::format("video group {} is empty", g));
    std::vector<int> members = groups[g];
    std::sort(members.begin(), members.end());
    for (int video : members) {
      const auto it = out.evidence.find(video);
      if (it == out.evidence.end())
        throw Error(Errc::incomplete_index, fmt::format("video {} has no training ratings", video));
      if (!lead[g] || prominence(it->second) > prominence(*lead[g])) lead[g] = &it->second;
    }
  }
  std::array<Quadrant, 4> perm = kQuadrants;
  std::array<Quadrant, 4> best = perm;
  double best_score = -std::numeric_limits<double>::infinity();
  std::array<int, 4> order = {0, 1, 2, 3};
  do {
    for (std::size_t g = 0; g < 4; ++g) perm[g] = kQuadrants[static_cast<std::size_t>(order[g])];
    double score = 0.0;
    for (std::size_t g = 0; g < 4; ++g) score += quadrant_affinity(*lead[g], perm[g]);
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  out.groups = groups;
  out.group_quadrant.assign(best.begin(), best.end());
  for (std::size_t g = 0; g < 4; ++g)
    for (int video : groups[g]) out.quadrant[video] = best[g];
  return out;
}

std::string_view grouping_name(ModelGrouping g) {
  switch (g) {
    case ModelGrouping::per_file: return "per_file";
    case ModelGrouping::per_video: return "per_video";
    case ModelGrouping::per_quadrant_pair: return "per_quadrant_pair";
    case ModelGrouping::per_video_group: return "per_video_group";
  }
  return "?";
}

TargetRule target_rule_for(Quadrant test) {
  const bool hv = high_valence(test), ha = high_arousal(test);
  TargetRule r;
  r.test_quadrant = test;
  r.valence = {make_quadrant(false, !ha), make_quadrant(true, !ha)};
  r.arousal = {make_quadrant(!hv, true), make_quadrant(!hv, false)};
  return r;
}

std::vector<std::vector<int>> elicitor_video_groups(const DatasetIndex& index) {
  std::vector<std::vector<int>> groups;
  for (int fold : index.folds(Scenario::across_elicitor)) {
    std::set<int> videos;
    for (const auto* e : index.select(Scenario::across_elicitor, fold, corpus::Split::test)) videos.insert(e->video_id);
    groups.emplace_back(videos.begin(), videos.end());
  }
  return groups;
}

VideoQuadrantMap analyze_elicitor_quadrants(const DatasetIndex& index) {
  std::map<std::pair<int, int>, const DatasetEntry*> unique;
  for (const auto* e : index.select(Scenario::across_elicitor))
    if (e->split == corpus::Split::train) unique.emplace(std::make_pair(e->subject_id, e->video_id), e);
  if (unique.empty()) throw Error(Errc::incomplete_index, "no across-elicitor training files");
  std::vector<corpus::AnnotationTrack> tracks;
  tracks.reserve(unique.size());
  for (const auto& [key, e] : unique) tracks.push_back(corpus::load_annotations(*e->annotations));
  std::vector<VideoRatings> ratings;
  for (const auto& t : tracks) ratings.push_back({t.video_id, &t});
  const auto groups = elicitor_video_groups(index);
  return quadrant_meta_analysis(ratings, groups.size() == 4 ? groups : std::vector<std::vector<int>>{});
}

namespace {

std::string file_key(const DatasetEntry& e) { return fmt::format("sub_{}_vid_{}", e.subject_id, e.video_id); }
std::string video_key(int video) { return fmt::format("vid_{}", video); }

std::vector<ModelGroup> group_by(const std::vector<DatasetEntry>& train, auto key_of) {
  std::map<std::string, std::vector<DatasetEntry>> m;
  std::vector<std::string> order;
  for (const auto& e : train) {
    const auto k = key_of(e);
    if (!m.count(k)) order.push_back(k);
    m[k].push_back(e);
  }
  std::vector<ModelGroup> out;
  for (const auto& k : order) out.push_back({k, m[k]});
  return out;
}

}  // namespace

std::vector<FoldSpec> build_folds(Scenario scenario, const DatasetIndex& index, const VideoQuadrantMap& quadrants) {
  const auto fold_ids = index.folds(scenario);
  if (fold_ids.empty())
    throw Error(Errc::incomplete_index, fmt::format("index has no entries for {}", corpus::scenario_name(scenario)));
  std::vector<FoldSpec> folds;
  for (int f : fold_ids) {
    FoldSpec spec;
    spec.scenario = scenario;
    spec.fold_id = f;
    for (const auto* e : index.select(scenario, f, corpus::Split::train)) spec.train.push_back(*e);
    for (const auto* e : index.select(scenario, f, corpus::Split::test)) spec.test.push_back(*e);
    if (spec.train.empty() || spec.test.empty())
      throw Error(Errc::incomplete_index, fmt::format("{} fold {} lacks train or test files",
                                                      corpus::scenario_name(scenario), f));
    switch (scenario) {
      case Scenario::across_time:
        spec.grouping = ModelGrouping::per_file;
        spec.groups = group_by(spec.train, file_key);
        break;
      case Scenario::across_subject:
        spec.grouping = ModelGrouping::per_video;
        spec.groups = group_by(spec.train, [](const DatasetEntry& e) { return video_key(e.video_id); });
        break;
      case Scenario::across_elicitor:
        spec.grouping = ModelGrouping::per_quadrant_pair;
        for (const auto* list : {&spec.train, &spec.test})
          for (const auto& e : *list) spec.video_quadrants[e.video_id] = quadrants.at(e.video_id);
        break;
      case Scenario::across_version:
        spec.grouping = ModelGrouping::per_video_group;
        spec.groups = group_by(spec.train, [](const DatasetEntry& e) { return video_key(e.video_id); });
        break;
    }
    folds.push_back(std::move(spec));
  }
  return folds;
}

std::vector<TrainingSubset> training_subsets_for_target(const FoldSpec& fold, Target target,
                                                        const DatasetEntry& test_entry) {
  const bool known = std::any_of(fold.test.begin(), fold.test.end(), [&](const DatasetEntry& e) {
    return e.subject_id == test_entry.subject_id && e.video_id == test_entry.video_id;
  });
  if (!known) throw Error(Errc::invalid_argument, fmt::format("{} is not a test file of this fold", file_key(test_entry)));
  auto find_group = [&](const std::string& key) -> std::vector<TrainingSubset> {
    for (const auto& g : fold.groups)
      if (g.key == key) return {{g.key, g.entries}};
    throw Error(Errc::no_matching_model, fmt::format("no training group '{}' for test file {}", key, file_key(test_entry)));
  };
  switch (fold.scenario) {
    case Scenario::across_time: return find_group(file_key(test_entry));
    case Scenario::across_subject: return find_group(video_key(test_entry.video_id));
    case Scenario::across_elicitor: {
      const auto it = fold.video_quadrants.find(test_entry.video_id);
      if (it == fold.video_quadrants.end())
        throw Error(Errc::incomplete_index, fmt::format("video {} has no quadrant", test_entry.video_id));
      const auto rule = target_rule_for(it->second);
      const auto& pair = target == Target::valence ? rule.valence : rule.arousal;
      TrainingSubset s;
      s.model_key = fmt::format("{}:{}+{}", corpus::target_name(target), quadrant_name(pair[0]), quadrant_name(pair[1]));
      for (const auto& e : fold.train) {
        const auto q = fold.video_quadrants.at(e.video_id);
        if (q == pair[0] || q == pair[1]) s.entries.push_back(e);
      }
      if (s.entries.empty())
        throw Error(Errc::no_matching_model, fmt::format("no training files in quadrants {} / {}", quadrant_name(pair[0]),
                                                         quadrant_name(pair[1])));
      return {s};
    }
    case Scenario::across_version: {
      std::vector<TrainingSubset> out;
      for (const auto& g : fold.groups) out.push_back({g.key, g.entries});
      if (out.empty()) throw Error(Errc::no_matching_model, "no training groups");
      return out;
    }
  }
  throw Error(Errc::internal, "unknown scenario");
}

std::vector<TrainingSubset> all_training_subsets(const FoldSpec& fold, Target target) {
  std::vector<TrainingSubset> out;
  std::set<std::string> seen;
  for (const auto& e : fold.test)
    for (auto& s : training_subsets_for_target(fold, target, e))
      if (seen.insert(s.model_key).second) out.push_back(std::move(s));
  return out;
}

void write_fold_manifest(const FoldSpec& fold, const std::filesystem::path& path) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scenario"] = corpus::scenario_name(fold.scenario);
  j["fold"] = fold.fold_id;
  j["model_grouping"] = grouping_name(fold.grouping);
  auto paths = [](const std::vector<DatasetEntry>& list) {
    ordered_json a = ordered_json::array();
    for (const auto& e : list) a.push_back(e.physiology.generic_string());
    return a;
  };
  j["train"] = paths(fold.train);
  j["test"] = paths(fold.test);
  if (fold.scenario == Scenario::across_elicitor) {
    ordered_json q = ordered_json::object();
    for (const auto& [video, quad] : fold.video_quadrants) q[std::to_string(video)] = quadrant_name(quad);
    j["video_quadrants"] = q;
    ordered_json rules = ordered_json::object();
    for (auto target : corpus::kTargets) {
      ordered_json models = ordered_json::object();
      for (auto& s : all_training_subsets(fold, target)) {
        ordered_json files = ordered_json::array();
        for (const auto& e : s.entries) files.push_back(file_key(e));
        models[s.model_key] = files;
      }
      rules[std::string(corpus::target_name(target))] = models;
    }
    j["target_rules"] = rules;
  } else {
    ordered_json groups = ordered_json::object();
    for (const auto& g : fold.groups) {
      ordered_json files = ordered_json::array();
      for (const auto& e : g.entries) files.push_back(file_key(e));
      groups[g.key] = files;
    }
    j["model_groups"] = groups;
  }
  csv::write_text(path, j.dump(2) + "\n");
}

}  // namespace affectfuse::scenarios

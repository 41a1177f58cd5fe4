#pragma once

#include "affectfuse/corpus.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace affectfuse::scenarios {

using corpus::DatasetEntry;
using corpus::DatasetIndex;
using corpus::Scenario;
using corpus::Target;

/// Affect-grid quadrant. Enum order: HVHA, LVHA, LVLA, HVLA.
enum class Quadrant { hvha, lvha, lvla, hvla };
inline constexpr std::array<Quadrant, 4> kQuadrants = {Quadrant::hvha, Quadrant::lvha, Quadrant::lvla, Quadrant::hvla};

std::string_view quadrant_name(Quadrant q);  // "HVHA", "LVHA", ...
constexpr bool high_valence(Quadrant q) { return q == Quadrant::hvha || q == Quadrant::hvla; }
constexpr bool high_arousal(Quadrant q) { return q == Quadrant::hvha || q == Quadrant::lvha; }
Quadrant make_quadrant(bool high_valence, bool high_arousal);

struct VideoEvidence {
  double mean_valence = 0.0;
  double mean_arousal = 0.0;
  double median_valence = 0.0;
  double median_arousal = 0.0;
  std::size_t samples = 0;
};

struct VideoQuadrantMap {
  std::map<int, Quadrant> quadrant;
  std::map<int, VideoEvidence> evidence;
  std::vector<std::vector<int>> groups;  // when assigned as groups, in input order
  std::vector<Quadrant> group_quadrant;  // parallel to groups

  Quadrant at(int video_id) const;  // IncompleteIndex if unmapped
};

struct VideoRatings {
  int video_id = 0;
  const corpus::AnnotationTrack* track = nullptr;
};

/// Per-video pooled mean/median of the ratings; the sign of the mean against
/// the 5.0 midpoint gives each video's quadrant. When `groups` holds four
/// video groups, the groups are mapped bijectively onto the four quadrants,
/// maximising the summed signed distance from the midpoint of each group's
/// most prominent video (exhaustive over the 24 bijections).
VideoQuadrantMap quadrant_meta_analysis(const std::vector<VideoRatings>& ratings,
                                        const std::vector<std::vector<int>>& groups = {});

/// Score of mapping a video with the given mean ratings to quadrant q.
double quadrant_affinity(const VideoEvidence& e, Quadrant q);

enum class ModelGrouping { per_file, per_video, per_quadrant_pair, per_video_group };
std::string_view grouping_name(ModelGrouping g);

struct ModelGroup {
  std::string key;
  std::vector<DatasetEntry> entries;
};

struct TargetRule {
  Quadrant test_quadrant = Quadrant::hvha;
  std::array<Quadrant, 2> valence{};
  std::array<Quadrant, 2> arousal{};
};

/// Two training quadrants per target for a held-out quadrant: valence varies
/// while arousal is held opposite to the test quadrant, and vice versa.
TargetRule target_rule_for(Quadrant test_quadrant);

struct FoldSpec {
  Scenario scenario = Scenario::across_time;
  int fold_id = 0;
  std::vector<DatasetEntry> train;
  std::vector<DatasetEntry> test;
  ModelGrouping grouping = ModelGrouping::per_file;
  std::vector<ModelGroup> groups;  // target-independent groupings
  std::map<int, Quadrant> video_quadrants;  // across_elicitor only
};

/// Test-video sets of the across-elicitor folds, one group per fold.
std::vector<std::vector<int>> elicitor_video_groups(const DatasetIndex& index);

/// Loads the pooled (deduplicated) across-elicitor training annotations and
/// runs the meta-analysis with the fold-derived video groups.
VideoQuadrantMap analyze_elicitor_quadrants(const DatasetIndex& index);

std::vector<FoldSpec> build_folds(Scenario scenario, const DatasetIndex& index, const VideoQuadrantMap& quadrants = {});

struct TrainingSubset {
  std::string model_key;
  std::vector<DatasetEntry> entries;
};

/// Models (and their training files) that predict `target` for `test_entry`.
std::vector<TrainingSubset> training_subsets_for_target(const FoldSpec& fold, Target target,
                                                        const DatasetEntry& test_entry);

/// Every distinct (model key, training files) pair needed for a fold.
std::vector<TrainingSubset> all_training_subsets(const FoldSpec& fold, Target target);

/// Human-readable JSON manifest for one fold.
void write_fold_manifest(const FoldSpec& fold, const std::filesystem::path& path);

}  // namespace affectfuse::scenarios

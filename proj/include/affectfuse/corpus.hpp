#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace affectfuse::corpus {

enum class Channel : std::size_t { ecg, bvp, gsr, rsp, skt, emg_zygo, emg_coru, emg_trap };
inline constexpr std::size_t kChannelCount = 8;
inline constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "ecg", "bvp", "gsr", "rsp", "skt", "emg_zygo", "emg_coru", "emg_trap"};
inline constexpr std::array<Channel, kChannelCount> kAllChannels = {
    Channel::ecg, Channel::bvp, Channel::gsr, Channel::rsp,
    Channel::skt, Channel::emg_zygo, Channel::emg_coru, Channel::emg_trap};

inline constexpr double kSampleRate = 1000.0;
inline constexpr double kAnnotationStep = 0.05;
inline constexpr double kRatingMin = 0.5;
inline constexpr double kRatingMax = 9.5;
inline constexpr double kRatingMidpoint = 5.0;

constexpr std::string_view channel_name(Channel c) { return kChannelNames[static_cast<std::size_t>(c)]; }

enum class TimeUnit { seconds, milliseconds };

/// One subject x video recording, all channels at 1 kHz on a shared clock.
struct Recording {
  int subject_id = 0;
  int video_id = 0;
  double sample_rate = kSampleRate;
  double t0 = 0.0;  // seconds
  TimeUnit time_unit = TimeUnit::seconds;
  std::array<std::vector<double>, kChannelCount> channels;

  std::size_t size() const noexcept { return channels[0].size(); }
  double duration() const noexcept { return static_cast<double>(size()) / sample_rate; }
  double end_time() const noexcept { return t0 + static_cast<double>(size() - 1) / sample_rate; }
  const std::vector<double>& channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  std::vector<double>& channel(Channel c) { return channels[static_cast<std::size_t>(c)]; }
};

/// Continuous ratings at 20 Hz on the 0.5-9.5 scale.
struct AnnotationTrack {
  int subject_id = 0;
  int video_id = 0;
  TimeUnit time_unit = TimeUnit::seconds;
  std::vector<double> timestamps;  // seconds
  std::vector<double> valence;
  std::vector<double> arousal;

  std::size_t size() const noexcept { return timestamps.size(); }
};

enum class Target { valence, arousal };
inline constexpr std::array<Target, 2> kTargets = {Target::valence, Target::arousal};
constexpr std::string_view target_name(Target t) { return t == Target::valence ? "valence" : "arousal"; }

enum class Scenario { across_time = 1, across_subject = 2, across_elicitor = 3, across_version = 4 };
inline constexpr std::array<Scenario, 4> kAllScenarios = {Scenario::across_time, Scenario::across_subject,
                                                         Scenario::across_elicitor, Scenario::across_version};
enum class Split { train, test };

std::string_view scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view text);  // "1".."4" or the names
std::string_view split_name(Split s);

struct DatasetEntry {
  Scenario scenario = Scenario::across_time;
  int fold = 0;
  Split split = Split::train;
  int subject_id = 0;
  int video_id = 0;
  std::filesystem::path physiology;
  std::optional<std::filesystem::path> annotations;  // absent for unlabeled test files

  std::string file_name() const;
  std::string key() const;  // "scenario_k/fold_j/split/sub_S_vid_V"
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;

  std::vector<const DatasetEntry*> select(Scenario s) const;
  std::vector<const DatasetEntry*> select(Scenario s, int fold, Split split) const;
  std::vector<int> folds(Scenario s) const;
};

/// Parses "sub_S_vid_V.csv" into (subject, video).
std::optional<std::pair<int, int>> parse_file_name(std::string_view name);
std::string make_file_name(int subject_id, int video_id);

Recording load_recording(const std::filesystem::path& path);
AnnotationTrack load_annotations(const std::filesystem::path& path);
void save_recording(const Recording& rec, const std::filesystem::path& path);
void save_annotations(const AnnotationTrack& track, const std::filesystem::path& path);

/// Walks scenario_k/[fold_j/]{train,test}/{physiology,annotations}/sub_S_vid_V.csv.
DatasetIndex enumerate_dataset(const std::filesystem::path& root);

/// Checks that an annotation track fits inside its recording.
void check_pairing(const Recording& rec, const AnnotationTrack& track);

// ---------------------------------------------------------------------------
// Synthetic corpora

struct SynthesisSpec {
  int subjects = 4;
  int videos = 4;
  double duration_s = 60.0;
  double train_fraction = 0.6;  // across-time split point
  double gap_s = 0.0;           // across-time gap between train and test parts
  double coupling_gain = 1.0;   // 0 makes physiology independent of affect
  double noise_level = 1.0;
  double affect_sd = 1.5;          // latent excursion around the video's base
  double affect_period_s = 15.0;   // natural period of the latent oscillator
  double affect_damping = 0.3;     // damping ratio of the latent oscillator
  double label_lag_s = 0.0;        // ratings trail the physiology by this much
  double fast_valence_amplitude = 0.0;  // broadband valence jitter (carried by SKT)
  double fast_valence_bandwidth_hz = 25.0;
  std::optional<std::uint64_t> latent_seed;  // defaults to a stream derived from seed
  std::vector<Scenario> scenarios = {Scenario::across_time};

  void validate() const;
};

struct LatentAffect {
  std::vector<double> valence;  // at 1 kHz
  std::vector<double> arousal;
};

/// Smooth bounded latent trajectories (noise-driven damped oscillator about a
/// per-video base) for one subject x video.
LatentAffect synthesize_latent(const SynthesisSpec& spec, std::uint64_t seed, int subject_id, int video_id,
                               std::size_t samples);

/// Physiology driven by a latent affect trajectory: heart rate on ECG/BVP,
/// tonic level and SCR rate on EDA, breathing rate on RSP, SKT drift, EMG bursts.
Recording synthesize_recording(const LatentAffect& latent, double gain, double noise_level, std::uint64_t seed);

/// Writes a synthetic corpus in the challenge layout under `root` and
/// returns its index. Deterministic for a fixed seed.
DatasetIndex generate_synthetic_dataset(std::uint64_t seed, const SynthesisSpec& spec,
                                        const std::filesystem::path& root);

}  // namespace affectfuse::corpus

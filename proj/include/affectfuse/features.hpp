#pragma once

#include "affectfuse/corpus.hpp"
#include "affectfuse/dsp.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace affectfuse::features {

struct WindowConfig {
  double ecg_s = 10.0;
  double bvp_s = 10.0;
  double rsp_s = 10.0;
  double gsr_s = 4.0;
  double skt_s = 4.0;
  double emg_s = 1.0;
  double raw_context_halfwidth_s = 0.25;
  double raw_context_rate_hz = 20.0;
  double max_delay_s = 0.05;

  void validate() const;
  /// Context samples per channel: round(2 * halfwidth * rate).
  std::size_t context_samples() const;
  /// 8 channels times context_samples().
  std::size_t context_width() const;
};

inline constexpr std::size_t kBvpWidth = 10;
inline constexpr std::size_t kEcgWidth = 15;
inline constexpr std::size_t kRspWidth = 20;
inline constexpr std::size_t kEdaWidth = 6;
inline constexpr std::size_t kEmgWidth = 6;
inline constexpr std::size_t kTableWidth = kBvpWidth + kEcgWidth + kRspWidth + kEdaWidth + 3 * kEmgWidth;  // 69

enum class FeatureKind { bvp, ecg, rsp, eda, emg };

FeatureKind parse_feature_kind(std::string_view name);  // UnknownKind
std::vector<std::string> feature_names(FeatureKind kind);

class FeatureExtractor;

/// One row per annotation timestamp. Columns: Table I block (bvp, ecg, rsp,
/// eda, emg_zygo, emg_coru, emg_trap) then the raw-context block
/// (channel-major, oldest offset first).
struct FeatureMatrix {
  int subject_id = 0;
  int video_id = 0;
  std::vector<double> timestamps;
  std::vector<std::string> column_names;
  std::vector<double> data;  // row-major
  double delay_s = 0.0;
  std::shared_ptr<const FeatureExtractor> source;  // enables shift_features

  std::size_t rows() const noexcept { return timestamps.size(); }
  std::size_t cols() const noexcept { return column_names.size(); }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  /// Column index by name, or -1.
  int find(std::string_view name) const;
};

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Building blocks

/// Notches at 60/120/180/240 Hz (3 Hz wide), bandpass 5-250 Hz, detrend,
/// z-score, 100 ms RMS, cubic Savitzky-Golay over 1 s, floored at 0.
/// Returns zeros when filtering leaves less than 1e-3 of the input's
/// standard deviation (measured away from the first and last second).
dsp::Signal clean_emg(const dsp::Signal& raw);

struct RateTrack {
  std::vector<double> samples;  // events per minute
  double sample_rate = 1000.0;
};

/// 60/IBI at each peak (the first peak takes the first interval), linear in
/// between, held before the first and after the last peak. TooFewPeaks if < 2.
RateTrack rate_track_from_peaks(std::span<const std::size_t> peaks, std::size_t length, double sample_rate);

struct EdaComponents {
  dsp::Signal tonic;
  dsp::Signal phasic;
};

/// tonic = lowpass 0.05 Hz; phasic = input - tonic.
EdaComponents eda_decompose(const dsp::Signal& clean);

/// Events supporting one window. Indices are absolute positions in `signal`;
/// the window is [begin, end] inclusive.
struct WindowInput {
  std::span<const double> signal;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::span<const std::size_t> peaks;    // sorted; may extend beyond the window
  std::span<const std::size_t> troughs;  // RSP troughs / SCR onsets
  double sample_rate = 1000.0;
};

/// Table I features for one window. Returns nullopt when the rate features
/// are undefined (fewer than two peaks inside the window); callers impute.
std::optional<std::vector<double>> extract_features(FeatureKind kind, const WindowInput& in);

// ---------------------------------------------------------------------------
// Whole-recording extraction

/// Holds the cleaned channels and detected events of one recording, cut at the
/// last sample any requested row can reach, so rows can be recomputed at any
/// delay without re-cleaning.
class FeatureExtractor {
 public:
  FeatureExtractor(const corpus::Recording& rec, std::vector<double> timestamps, WindowConfig cfg);

  FeatureMatrix build(double delay_s = 0.0) const;

  const WindowConfig& config() const noexcept { return cfg_; }
  const std::vector<double>& timestamps() const noexcept { return timestamps_; }
  const std::vector<std::string>& column_names() const noexcept { return names_; }
  /// Cleaned channel as used by the context block.
  const std::vector<double>& cleaned(corpus::Channel c) const;
  std::size_t horizon() const noexcept { return horizon_; }

 private:
  void compute_row(std::size_t end, double* out, const double* previous) const;

  WindowConfig cfg_;
  std::vector<double> timestamps_;
  std::vector<std::string> names_;
  int subject_id_ = 0;
  int video_id_ = 0;
  double t0_ = 0.0;
  double fs_ = 1000.0;
  std::size_t horizon_ = 0;
  std::array<std::vector<double>, corpus::kChannelCount> clean_;
  std::vector<double> phasic_;
  std::vector<std::size_t> ecg_peaks_, bvp_peaks_, rsp_peaks_, rsp_troughs_, scr_peaks_, scr_onsets_;
};

FeatureMatrix build_feature_frames(const corpus::Recording& rec, std::span<const double> timestamps,
                                   const WindowConfig& cfg = {});

/// Recomputes every row with windows ending at timestamp - delay on the 1 kHz
/// timeline. Requires a matrix produced by build_feature_frames.
FeatureMatrix shift_features(const FeatureMatrix& matrix, double delay_s);

}  // namespace affectfuse::features

#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the code paths it is used to check.

#include <cmath>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fixtures {

inline std::vector<double> sine(double freq_hz, double fs, double seconds, double amplitude = 1.0,
                                double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / fs + phase);
  return x;
}

inline double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

// Brute-force RMSE, written independently of the library's scoring code.
inline double brute_rmse(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - static_cast<long double>(b[i]);
    acc += d * d;
  }
  return static_cast<double>(std::sqrt(acc / static_cast<long double>(a.size())));
}

// Analytic Butterworth magnitude at frequency f for the prewarped design.
inline double butterworth_lowpass_mag(double f, double fc, double fs, int order) {
  const double w = std::tan(std::numbers::pi * f / fs), wc = std::tan(std::numbers::pi * fc / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(w / wc, 2 * order));
}

inline double butterworth_highpass_mag(double f, double fc, double fs, int order) {
  const double w = std::tan(std::numbers::pi * f / fs), wc = std::tan(std::numbers::pi * fc / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(wc / w, 2 * order));
}

// Bandpass/bandstop via the lowpass prototype variable Omega.
inline double butterworth_band_mag(double f, double lo, double hi, double fs, int order, bool stop) {
  const double w = std::tan(std::numbers::pi * f / fs);
  const double w1 = std::tan(std::numbers::pi * lo / fs), w2 = std::tan(std::numbers::pi * hi / fs);
  const double w0sq = w1 * w2, bw = w2 - w1;
  double omega = (w * w - w0sq) / (w * bw);
  if (stop) omega = 1.0 / omega;
  return 1.0 / std::sqrt(1.0 + std::pow(omega, 2 * order));
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("affectfuse_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline void touch(const std::filesystem::path& p, const std::string& text = "") {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Placeholder files in the official challenge layout: 30 subjects x 8 videos.
// Across-subject folds take 6 subjects each; across-elicitor folds take 2
// videos each; across-version splits the videos 4/4.
inline void write_official_layout(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  auto name = [](int s, int v) { return "sub_" + std::to_string(s) + "_vid_" + std::to_string(v) + ".csv"; };
  auto put = [&](const fs::path& dir, int s, int v) {
    touch(dir / "physiology" / name(s, v));
    touch(dir / "annotations" / name(s, v));
  };
  const int videos[8] = {1, 2, 3, 4, 5, 6, 7, 8};
  for (int s = 1; s <= 30; ++s)
    for (int v : videos) {
      put(root / "scenario_1" / "train", s, v);
      put(root / "scenario_1" / "test", s, v);
    }
  for (int f = 0; f < 5; ++f)
    for (int s = 1; s <= 30; ++s)
      for (int v : videos) put(root / "scenario_2" / ("fold_" + std::to_string(f)) / ((s - 1) / 6 == f ? "test" : "train"), s, v);
  for (int f = 0; f < 4; ++f)
    for (int s = 1; s <= 30; ++s)
      for (int v : videos) put(root / "scenario_3" / ("fold_" + std::to_string(f)) / ((v - 1) / 2 == f ? "test" : "train"), s, v);
  for (int f = 0; f < 2; ++f)
    for (int s = 1; s <= 30; ++s)
      for (int v : videos) put(root / "scenario_4" / ("fold_" + std::to_string(f)) / ((v - 1) / 4 == f ? "train" : "test"), s, v);
}

}  // namespace fixtures

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace affectfuse::dsp {

struct Signal {
  std::vector<double> samples;
  double sample_rate = 1000.0;

  std::size_t size() const noexcept { return samples.size(); }
};

enum class FilterKind { lowpass, highpass, bandpass, bandstop };

struct FilterSpec {
  FilterKind kind = FilterKind::lowpass;
  double low_hz = 0.0;   // sole cutoff for lowpass/highpass
  double high_hz = 0.0;  // upper edge for bandpass/bandstop
  int order = 4;

  static FilterSpec lowpass(double hz, int order = 4) { return {FilterKind::lowpass, hz, 0.0, order}; }
  static FilterSpec highpass(double hz, int order = 4) { return {FilterKind::highpass, hz, 0.0, order}; }
  static FilterSpec bandpass(double lo, double hi, int order = 4) { return {FilterKind::bandpass, lo, hi, order}; }
  static FilterSpec bandstop(double lo, double hi, int order = 4) { return {FilterKind::bandstop, lo, hi, order}; }
};

// One biquad: b0 b1 b2 / 1 a1 a2.
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 2> a{};
};

/// Butterworth design as cascaded second-order sections.
/// Throws Errc::invalid_cutoff when the cutoffs are not strictly inside
/// (0, sample_rate/2) or are out of order.
std::vector<Biquad> butterworth_sos(const FilterSpec& spec, double sample_rate);

/// Number of samples added at each end before forward-backward filtering.
std::size_t filtfilt_padding(std::size_t sections) noexcept;

/// Zero-phase (forward-backward) Butterworth filtering with odd reflection
/// padding and steady-state initial conditions. Length preserving.
Signal iir_filter(const Signal& signal, const FilterSpec& spec);

/// Band-stop notch of total width `width_hz` centred on `f0_hz`.
Signal notch_filter(const Signal& signal, double f0_hz, double width_hz);

/// Removes the least-squares line. A single sample maps to 0.
Signal detrend(const Signal& signal);

/// Population z-score; constant input maps to all zeros.
Signal zscore(const Signal& signal);

/// Centred sliding RMS, windows truncated at the edges.
Signal rms_envelope(const Signal& signal, double window_s);

/// Savitzky-Golay smoothing with mirror padding. The window sample count is
/// round(length_s * fs), bumped to the next odd number.
Signal savgol_smooth(const Signal& signal, int order, double length_s);

/// Savitzky-Golay smoothing coefficients for the centre point.
std::vector<double> savgol_coefficients(int half_window, int order);

/// Trailing mean over up to n samples (fewer at the start).
std::vector<double> moving_average(std::span<const double> series, int n);

/// Local maxima whose prominence is at least `min_prominence` times the
/// signal's range, thinned greedily (highest prominence first, earlier index
/// on ties) so that kept peaks are at least `min_distance_s` apart.
std::vector<std::size_t> detect_peaks(const Signal& signal, double min_distance_s,
                                      double min_prominence);

/// Same as detect_peaks over a raw series with distance in samples.
std::vector<std::size_t> detect_peaks(std::span<const double> x, std::size_t min_distance,
                                      double min_prominence);

struct Trend {
  double linear = 0.0;     // per second
  double quadratic = 0.0;  // per second squared
  double r2 = 0.0;
};

/// Least-squares y = a + b t + c t^2 with t in seconds from the first sample.
Trend fit_trend(std::span<const double> series, double sample_rate);

}  // namespace affectfuse::dsp

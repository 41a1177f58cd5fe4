#include "affectfuse/features.hpp"

#include "affectfuse/error.hpp"
#include "csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace affectfuse::features {

using corpus::Channel;
using corpus::kChannelCount;

void WindowConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::invalid_argument, "window config: " + why); };
  for (double w : {ecg_s, bvp_s, rsp_s, gsr_s, skt_s, emg_s})
    if (!(w > 0.0)) fail("window lengths must be > 0");
  if (!(emg_s <= gsr_s && gsr_s <= std::min({ecg_s, bvp_s, rsp_s})))
    fail("expected emg <= eda <= ecg/bvp/rsp window lengths");
  if (!(raw_context_halfwidth_s >= 0.0)) fail("raw_context_halfwidth must be >= 0");
  if (!(raw_context_rate_hz > 0.0)) fail("raw_context_rate must be > 0");
  if (!(max_delay_s >= 0.0)) fail("max_delay must be >= 0");
}

std::size_t WindowConfig::context_samples() const {
  return static_cast<std::size_t>(std::llround(2.0 * raw_context_halfwidth_s * raw_context_rate_hz));
}

std::size_t WindowConfig::context_width() const { return kChannelCount * context_samples(); }

FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "bvp" || name == "ppg") return FeatureKind::bvp;
  if (name == "ecg") return FeatureKind::ecg;
  if (name == "rsp") return FeatureKind::rsp;
  if (name == "eda" || name == "gsr") return FeatureKind::eda;
  if (name == "emg") return FeatureKind::emg;
  throw Error(Errc::unknown_kind, fmt::format("unknown feature kind '{}'", name));
}

namespace {

const std::vector<std::string> kRateNames = {"rate_baseline",  "rate_max",          "rate_min",
                                             "rate_mean",      "rate_sd",           "rate_max_time",
                                             "rate_min_time",  "rate_trend_linear", "rate_trend_quadratic",
                                             "rate_trend_r2"};

}  // namespace

std::vector<std::string> feature_names(FeatureKind kind) {
  std::vector<std::string> out;
  switch (kind) {
    case FeatureKind::bvp:
      out = kRateNames;
      break;
    case FeatureKind::ecg:
      out = kRateNames;
      out.insert(out.end(), {"atrial_phase", "atrial_completion", "ventricular_phase", "ventricular_completion",
                             "quality_mean"});
      break;
    case FeatureKind::rsp:
      out = kRateNames;
      out.insert(out.end(), {"amplitude_baseline", "amplitude_max", "amplitude_min", "amplitude_meanraw",
                             "amplitude_mean", "amplitude_sd", "phase", "phase_completion", "rvt_baseline",
                             "rvt_mean"});
      break;
    case FeatureKind::eda:
      out = {"peak_amplitude",    "scr_count",     "scr_peak_amplitude", "scr_peak_amplitude_time",
             "scr_rise_time",     "scr_recovery_time"};
      break;
    case FeatureKind::emg:
      out = {"activation", "amplitude_mean", "amplitude_max", "amplitude_sd", "amplitude_max_time", "bursts"};
      break;
    default:
      throw Error(Errc::unknown_kind, "unknown feature kind");
  }
  return out;
}

int FeatureMatrix::find(std::string_view name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i)
    if (column_names[i] == name) return static_cast<int>(i);
  return -1;
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::string out = "time";
  for (const auto& n : m.column_names) out += "," + n;
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += csv::format_double(m.timestamps[r]);
    for (double v : m.row(r)) {
      out += ',';
      out += csv::format_double(v);
    }
    out += '\n';
  }
  csv::write_text(path, out);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kRejectedFraction = 1e-3;

double sd_of(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

dsp::Signal clean_emg(const dsp::Signal& raw) {
  dsp::Signal x = raw;
  for (double f0 : {60.0, 120.0, 180.0, 240.0}) x = dsp::notch_filter(x, f0, 3.0);
  x = dsp::iir_filter(x, dsp::FilterSpec::bandpass(5.0, 250.0));
  x = dsp::detrend(x);
  // A channel whose content the filters removed almost entirely (e.g. pure
  // mains hum) is flat; z-scoring would blow its residue up to unit
  // variance. Edge transients of the narrow notches are left out of the check.
  const std::size_t n = x.size();
  const std::size_t edge = std::min(n / 4, static_cast<std::size_t>(std::llround(raw.sample_rate)));
  const auto in = dsp::detrend(raw).samples;
  const auto interior = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(edge), v.end() - static_cast<std::ptrdiff_t>(edge));
  };
  if (sd_of(interior(x.samples)) <= kRejectedFraction * sd_of(interior(in))) {
    std::fill(x.samples.begin(), x.samples.end(), 0.0);
    return x;
  }
  x = dsp::zscore(x);
  x = dsp::rms_envelope(x, 0.1);
  x = dsp::savgol_smooth(x, 3, 1.0);
  for (auto& v : x.samples) v = std::max(0.0, v);
  return x;
}

namespace {

// Linear interpolation of values known at sorted positions; held outside.
std::vector<double> interpolate_events(std::span<const std::size_t> pos, std::span<const double> val, std::size_t length) {
  std::vector<double> out(length, 0.0);
  if (pos.empty()) return out;
  std::size_t k = 0;
  for (std::size_t i = 0; i < length; ++i) {
    while (k + 1 < pos.size() && pos[k + 1] <= i) ++k;
    if (i <= pos.front()) {
      out[i] = val.front();
    } else if (i >= pos.back()) {
      out[i] = val.back();
    } else {
      const double f = static_cast<double>(i - pos[k]) / static_cast<double>(pos[k + 1] - pos[k]);
      out[i] = val[k] + f * (val[k + 1] - val[k]);
    }
  }
  return out;
}

}  // namespace

RateTrack rate_track_from_peaks(std::span<const std::size_t> peaks, std::size_t length, double sample_rate) {
  if (peaks.size() < 2) throw Error(Errc::too_few_peaks, fmt::format("rate needs >= 2 peaks, got {}", peaks.size()));
  std::vector<double> rates(peaks.size());
  for (std::size_t k = 1; k < peaks.size(); ++k) {
    if (peaks[k] <= peaks[k - 1]) throw Error(Errc::invalid_argument, "peaks must be strictly increasing");
    rates[k] = 60.0 * sample_rate / static_cast<double>(peaks[k] - peaks[k - 1]);
  }
  rates[0] = rates[1];
  return {interpolate_events(peaks, rates, length), sample_rate};
}

EdaComponents eda_decompose(const dsp::Signal& clean) {
  EdaComponents out;
  out.tonic = dsp::iir_filter(clean, dsp::FilterSpec::lowpass(0.05));
  out.phasic.sample_rate = clean.sample_rate;
  out.phasic.samples.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out.phasic.samples[i] = clean.samples[i] - out.tonic.samples[i];
  return out;
}

// ---------------------------------------------------------------------------
// Per-window features

namespace {

struct Stats {
  double mean = 0.0, sd = 0.0, max = 0.0, min = 0.0;
  std::size_t argmax = 0, argmin = 0;
};

Stats stats_of(std::span<const double> x) {
  Stats s;
  if (x.empty()) return s;
  s.max = s.min = x[0];
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (x[i] > s.max) s.max = x[i], s.argmax = i;
    if (x[i] < s.min) s.min = x[i], s.argmin = i;
  }
  s.mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(x.size()));
  return s;
}

void append_rate_stats(std::vector<double>& out, std::span<const double> track, double fs) {
  const auto s = stats_of(track);
  out.push_back(track.front());
  out.push_back(s.max);
  out.push_back(s.min);
  out.push_back(s.mean);
  out.push_back(s.sd);
  out.push_back(static_cast<double>(s.argmax) / fs);
  out.push_back(static_cast<double>(s.argmin) / fs);
  if (track.size() >= 3) {
    const auto t = dsp::fit_trend(track, fs);
    out.insert(out.end(), {t.linear, t.quadratic, t.r2});
  } else {
    out.insert(out.end(), {0.0, 0.0, 0.0});
  }
}

std::span<const std::size_t> events_in(std::span<const std::size_t> ev, std::size_t begin, std::size_t end) {
  const auto lo = std::lower_bound(ev.begin(), ev.end(), begin);
  const auto hi = std::upper_bound(ev.begin(), ev.end(), end);
  return {lo, hi};
}

std::vector<std::size_t> relative(std::span<const std::size_t> ev, std::size_t begin) {
  std::vector<std::size_t> out(ev.size());
  for (std::size_t i = 0; i < ev.size(); ++i) out[i] = ev[i] - begin;
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const auto sa = stats_of(a), sb = stats_of(b);
  if (sa.sd == 0.0 || sb.sd == 0.0) return 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - sa.mean) * (b[i] - sb.mean);
  return c / (static_cast<double>(a.size()) * sa.sd * sb.sd);
}

double ecg_quality(const WindowInput& in, std::span<const std::size_t> beats) {
  const auto before = static_cast<std::size_t>(std::llround(0.2 * in.sample_rate));
  const auto after = static_cast<std::size_t>(std::llround(0.4 * in.sample_rate));
  std::vector<std::size_t> usable;
  for (auto p : beats)
    if (p >= before && p + after <= in.signal.size()) usable.push_back(p);
  if (usable.empty()) return 0.0;
  const std::size_t len = before + after;
  std::vector<double> tmpl(len, 0.0);
  for (auto p : usable)
    for (std::size_t i = 0; i < len; ++i) tmpl[i] += in.signal[p - before + i];
  for (auto& v : tmpl) v /= static_cast<double>(usable.size());
  double q = 0.0;
  for (auto p : usable) q += pearson(in.signal.subspan(p - before, len), tmpl);
  return q / static_cast<double>(usable.size());
}

std::optional<std::vector<double>> rate_block(const WindowInput& in, std::span<const std::size_t> window_peaks,
                                              std::vector<double>* track_out = nullptr) {
  if (window_peaks.size() < 2) return std::nullopt;
  const auto rel = relative(window_peaks, in.begin);
  auto track = rate_track_from_peaks(rel, in.end - in.begin + 1, in.sample_rate).samples;
  std::vector<double> out;
  out.reserve(kRspWidth);
  append_rate_stats(out, track, in.sample_rate);
  if (track_out) *track_out = std::move(track);
  return out;
}

std::optional<std::vector<double>> ecg_features(const WindowInput& in) {
  const auto beats = events_in(in.peaks, in.begin, in.end);
  auto out = rate_block(in, beats);
  if (!out) return std::nullopt;
  const double last = static_cast<double>(beats.back());
  const double rr = last - static_cast<double>(beats[beats.size() - 2]);
  const double e = std::fmod(static_cast<double>(in.end) - last, rr);
  double atrial = 0.0, atrial_c = 0.0, vent = 0.0, vent_c = 0.0;
  if (e < 0.4 * rr) {
    vent = 1.0;
    vent_c = e / (0.4 * rr);
  }
  if (e >= 0.8 * rr) {
    atrial = 1.0;
    atrial_c = (e - 0.8 * rr) / (0.2 * rr);
  }
  out->insert(out->end(), {atrial, atrial_c, vent, vent_c, ecg_quality(in, beats)});
  return out;
}

std::optional<std::vector<double>> rsp_features(const WindowInput& in) {
  const auto breaths = events_in(in.peaks, in.begin, in.end);
  std::vector<double> rate;
  auto out = rate_block(in, breaths, &rate);
  if (!out) return std::nullopt;
  const std::size_t len = in.end - in.begin + 1;

  // Amplitude: peak minus the trough since the previous peak.
  std::vector<std::size_t> amp_pos;
  std::vector<double> amp_val;
  const auto first = static_cast<std::size_t>(breaths.data() - in.peaks.data());
  for (std::size_t k = first; k < first + breaths.size(); ++k) {
    const std::size_t p = in.peaks[k];
    const std::size_t prev = k > 0 ? in.peaks[k - 1] : 0;
    auto it = std::lower_bound(in.troughs.begin(), in.troughs.end(), p);
    if (it == in.troughs.begin()) continue;
    const std::size_t tr = *std::prev(it);
    if (k > 0 && tr <= prev) continue;
    amp_pos.push_back(p - in.begin);
    amp_val.push_back(in.signal[p] - in.signal[tr]);
  }
  const auto amp = interpolate_events(amp_pos, amp_val, len);
  const auto s = stats_of(amp);
  out->insert(out->end(), {amp.front(), s.max, s.min, s.mean, s.mean - amp.front(), s.sd});

  // Phase at the window end: inspiration after a trough, expiration after a peak.
  double phase = 0.0, completion = 0.0;
  const auto last_peak = std::upper_bound(in.peaks.begin(), in.peaks.end(), in.end);
  const auto last_trough = std::upper_bound(in.troughs.begin(), in.troughs.end(), in.end);
  const bool have_peak = last_peak != in.peaks.begin();
  const bool have_trough = last_trough != in.troughs.begin();
  if (have_peak || have_trough) {
    const std::size_t lp = have_peak ? *std::prev(last_peak) : 0;
    const std::size_t lt = have_trough ? *std::prev(last_trough) : 0;
    const bool inspiring = have_trough && (!have_peak || lt > lp);
    phase = inspiring ? 1.0 : 0.0;
    const std::size_t since = inspiring ? lt : lp;
    // Duration of the current half cycle: until the next opposite extremum,
    // else the previous half cycle.
    const auto& other = inspiring ? in.peaks : in.troughs;
    const auto next = std::upper_bound(other.begin(), other.end(), in.end);
    double span = 0.0;
    if (next != other.end()) {
      span = static_cast<double>(*next - since);
    } else {
      const auto prev_other = std::lower_bound(other.begin(), other.end(), since);
      if (prev_other != other.begin()) span = static_cast<double>(since - *std::prev(prev_other));
    }
    if (span > 0.0) completion = std::clamp(static_cast<double>(in.end - since) / span, 0.0, 1.0);
  }
  out->insert(out->end(), {phase, completion});

  double rvt_sum = 0.0;
  for (std::size_t i = 0; i < len; ++i) rvt_sum += amp[i] * rate[i] / 60.0;
  out->insert(out->end(), {amp.front() * rate.front() / 60.0, rvt_sum / static_cast<double>(len)});
  return out;
}

std::vector<double> eda_features(const WindowInput& in) {
  const auto win = in.signal.subspan(in.begin, in.end - in.begin + 1);
  const double peak_amp = *std::max_element(win.begin(), win.end());
  const auto lo = std::lower_bound(in.peaks.begin(), in.peaks.end(), in.begin);
  const auto hi = std::upper_bound(in.peaks.begin(), in.peaks.end(), in.end);
  double amp = 0.0, amp_time = 0.0, rise = 0.0, recovery = 0.0;
  const auto count = static_cast<std::size_t>(hi - lo);
  for (auto it = lo; it != hi; ++it) {
    const std::size_t p = *it;
    const std::size_t onset = in.troughs[static_cast<std::size_t>(it - in.peaks.begin())];
    const double a = in.signal[p] - in.signal[onset];
    amp += a;
    amp_time += static_cast<double>(p - in.begin) / in.sample_rate;
    rise += static_cast<double>(p - onset) / in.sample_rate;
    const double half = in.signal[onset] + 0.5 * a;
    std::size_t r = p;
    while (r < in.end && in.signal[r] > half) ++r;
    recovery += static_cast<double>(r - p) / in.sample_rate;
  }
  if (count > 0) {
    const double n = static_cast<double>(count);
    amp /= n, amp_time /= n, rise /= n, recovery /= n;
  }
  return {peak_amp, static_cast<double>(count), amp, amp_time, rise, recovery};
}

std::vector<double> emg_features(const WindowInput& in) {
  const auto win = in.signal.subspan(in.begin, in.end - in.begin + 1);
  const auto s = stats_of(win);
  constexpr double threshold = 1.0;
  double bursts = 0.0;
  for (std::size_t i = std::max<std::size_t>(in.begin, 1); i <= in.end; ++i)
    if (in.signal[i - 1] <= threshold && in.signal[i] > threshold) bursts += 1.0;
  return {s.max > threshold ? 1.0 : 0.0, s.mean, s.max, s.sd, static_cast<double>(s.argmax) / in.sample_rate, bursts};
}

}  // namespace

std::optional<std::vector<double>> extract_features(FeatureKind kind, const WindowInput& in) {
  if (in.signal.empty() || in.begin > in.end || in.end >= in.signal.size())
    throw Error(Errc::invalid_window, fmt::format("window [{}, {}] outside signal of {} samples", in.begin, in.end,
                                                  in.signal.size()));
  switch (kind) {
    case FeatureKind::bvp: return rate_block(in, events_in(in.peaks, in.begin, in.end));
    case FeatureKind::ecg: return ecg_features(in);
    case FeatureKind::rsp: return rsp_features(in);
    case FeatureKind::eda: return eda_features(in);
    case FeatureKind::emg: return emg_features(in);
  }
  throw Error(Errc::unknown_kind, "unknown feature kind");
}

// ---------------------------------------------------------------------------
// FeatureExtractor

namespace {

std::string context_label(double offset_s) {
  const auto ms = static_cast<long long>(std::llround(offset_s * 1000.0));
  return ms < 0 ? fmt::format("m{}ms", -ms) : fmt::format("p{}ms", ms);
}

std::vector<double> slice(const std::vector<double>& x, std::size_t n) {
  return {x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace

FeatureExtractor::FeatureExtractor(const corpus::Recording& rec, std::vector<double> timestamps, WindowConfig cfg)
    : cfg_(cfg), timestamps_(std::move(timestamps)), subject_id_(rec.subject_id), video_id_(rec.video_id),
      t0_(rec.t0), fs_(rec.sample_rate) {
  cfg_.validate();
  if (rec.size() == 0) throw Error(Errc::empty_input, "empty recording");
  const double half = 0.5 / fs_;
  for (std::size_t i = 0; i < timestamps_.size(); ++i) {
    const double t = timestamps_[i];
    if (!(t >= rec.t0 - half && t <= rec.end_time() + half))
      throw Error(Errc::timestamp_out_of_range,
                  fmt::format("timestamp {} s outside recording [{}, {}] s", t, rec.t0, rec.end_time()));
    if (i > 0 && !(t > timestamps_[i - 1]))
      throw Error(Errc::invalid_argument, "annotation timestamps must be strictly increasing");
  }

  const std::array<std::pair<const char*, FeatureKind>, 4> blocks = {
      {{"bvp", FeatureKind::bvp}, {"ecg", FeatureKind::ecg}, {"rsp", FeatureKind::rsp}, {"eda", FeatureKind::eda}}};
  for (auto [prefix, kind] : blocks)
    for (const auto& n : feature_names(kind)) names_.push_back(fmt::format("{}_{}", prefix, n));
  for (auto ch : {Channel::emg_zygo, Channel::emg_coru, Channel::emg_trap})
    for (const auto& n : feature_names(FeatureKind::emg)) names_.push_back(fmt::format("{}_{}", corpus::channel_name(ch), n));
  const std::size_t k = cfg_.context_samples();
  const long long first = -static_cast<long long>(k / 2);
  for (auto ch : corpus::kAllChannels)
    for (std::size_t j = 0; j < k; ++j)
      names_.push_back(fmt::format("ctx_{}_{}", corpus::channel_name(ch),
                                   context_label(static_cast<double>(first + static_cast<long long>(j)) / cfg_.raw_context_rate_hz)));

  // Everything downstream only sees samples up to the furthest reachable
  // context sample of the last row, so trailing data cannot change any row.
  const double last_t = timestamps_.empty() ? rec.t0 : timestamps_.back();
  const long long last_offset = static_cast<long long>(std::ceil(
      static_cast<double>(first + static_cast<long long>(k) - 1) * fs_ / cfg_.raw_context_rate_hz));
  const long long reach = std::llround((last_t - rec.t0) * fs_) + std::max(0LL, last_offset) + 1;
  horizon_ = static_cast<std::size_t>(std::clamp<long long>(reach, 1, static_cast<long long>(rec.size())));

  auto sig = [&](Channel c) { return dsp::Signal{slice(rec.channel(c), horizon_), fs_}; };
  using dsp::FilterSpec;
  auto& ecg = clean_[static_cast<std::size_t>(Channel::ecg)];
  auto& bvp = clean_[static_cast<std::size_t>(Channel::bvp)];
  auto& gsr = clean_[static_cast<std::size_t>(Channel::gsr)];
  auto& rsp = clean_[static_cast<std::size_t>(Channel::rsp)];
  ecg = dsp::iir_filter(sig(Channel::ecg), FilterSpec::bandpass(0.5, 40.0)).samples;
  bvp = dsp::iir_filter(sig(Channel::bvp), FilterSpec::bandpass(0.5, 8.0)).samples;
  rsp = dsp::iir_filter(sig(Channel::rsp), FilterSpec::bandpass(0.05, 3.0)).samples;
  gsr = dsp::iir_filter(sig(Channel::gsr), FilterSpec::lowpass(3.0)).samples;
  clean_[static_cast<std::size_t>(Channel::skt)] = sig(Channel::skt).samples;
  for (auto ch : {Channel::emg_zygo, Channel::emg_coru, Channel::emg_trap})
    clean_[static_cast<std::size_t>(ch)] = clean_emg(sig(ch)).samples;

  const auto d = [&](double s) { return static_cast<std::size_t>(std::llround(s * fs_)); };
  ecg_peaks_ = dsp::detect_peaks(ecg, d(0.3), 0.35);
  bvp_peaks_ = dsp::detect_peaks(bvp, d(0.3), 0.3);
  rsp_peaks_ = dsp::detect_peaks(rsp, d(1.0), 0.3);
  std::vector<double> neg(rsp.size());
  std::transform(rsp.begin(), rsp.end(), neg.begin(), [](double v) { return -v; });
  rsp_troughs_ = dsp::detect_peaks(neg, d(1.0), 0.3);

  phasic_ = eda_decompose(dsp::Signal{gsr, fs_}).phasic.samples;
  scr_peaks_ = dsp::detect_peaks(phasic_, d(1.0), 0.01);
  scr_onsets_.resize(scr_peaks_.size());
  for (std::size_t i = 0; i < scr_peaks_.size(); ++i) {
    const std::size_t p = scr_peaks_[i];
    std::size_t lo = i > 0 ? scr_peaks_[i - 1] : 0;
    lo = std::max(lo, p > d(10.0) ? p - d(10.0) : 0);
    const auto it = std::min_element(phasic_.begin() + static_cast<std::ptrdiff_t>(lo),
                                     phasic_.begin() + static_cast<std::ptrdiff_t>(p) + 1);
    scr_onsets_[i] = static_cast<std::size_t>(it - phasic_.begin());
  }
}

const std::vector<double>& FeatureExtractor::cleaned(Channel c) const { return clean_[static_cast<std::size_t>(c)]; }

void FeatureExtractor::compute_row(std::size_t end, double* out, const double* previous) const {
  auto window = [&](double seconds) {
    const auto n = static_cast<std::size_t>(std::max(1LL, std::llround(seconds * fs_)));
    return end + 1 >= n ? end + 1 - n : 0;
  };
  std::size_t col = 0;
  auto put_rate_block = [&](FeatureKind kind, const std::vector<double>& signal, const std::vector<std::size_t>& peaks,
                            const std::vector<std::size_t>& troughs, double seconds, std::size_t width) {
    WindowInput in{signal, window(seconds), end, peaks, troughs, fs_};
    if (auto v = extract_features(kind, in)) {
      std::copy(v->begin(), v->end(), out + col);
    } else {
      for (std::size_t j = 0; j < width; ++j) out[col + j] = previous ? previous[col + j] : 0.0;
    }
    col += width;
  };
  put_rate_block(FeatureKind::bvp, cleaned(Channel::bvp), bvp_peaks_, {}, cfg_.bvp_s, kBvpWidth);
  put_rate_block(FeatureKind::ecg, cleaned(Channel::ecg), ecg_peaks_, {}, cfg_.ecg_s, kEcgWidth);
  put_rate_block(FeatureKind::rsp, cleaned(Channel::rsp), rsp_peaks_, rsp_troughs_, cfg_.rsp_s, kRspWidth);
  {
    const auto v = *extract_features(FeatureKind::eda, WindowInput{phasic_, window(cfg_.gsr_s), end, scr_peaks_, scr_onsets_, fs_});
    std::copy(v.begin(), v.end(), out + col);
    col += kEdaWidth;
  }
  for (auto ch : {Channel::emg_zygo, Channel::emg_coru, Channel::emg_trap}) {
    const auto v = *extract_features(FeatureKind::emg, WindowInput{cleaned(ch), window(cfg_.emg_s), end, {}, {}, fs_});
    std::copy(v.begin(), v.end(), out + col);
    col += kEmgWidth;
  }
  const std::size_t k = cfg_.context_samples();
  const long long first = -static_cast<long long>(k / 2);
  for (auto ch : corpus::kAllChannels) {
    const auto& x = cleaned(ch);
    for (std::size_t j = 0; j < k; ++j) {
      const long long off = std::llround(static_cast<double>(first + static_cast<long long>(j)) * fs_ / cfg_.raw_context_rate_hz);
      const long long idx = std::clamp<long long>(static_cast<long long>(end) + off, 0, static_cast<long long>(horizon_) - 1);
      out[col++] = x[static_cast<std::size_t>(idx)];
    }
  }
}

FeatureMatrix FeatureExtractor::build(double delay_s) const {
  if (!(delay_s >= 0.0 && delay_s <= cfg_.max_delay_s + 1e-12))
    throw Error(Errc::delay_out_of_range, fmt::format("delay {} s outside [0, {}] s", delay_s, cfg_.max_delay_s));
  FeatureMatrix m;
  m.subject_id = subject_id_;
  m.video_id = video_id_;
  m.timestamps = timestamps_;
  m.column_names = names_;
  m.delay_s = delay_s;
  const std::size_t w = names_.size();
  m.data.assign(timestamps_.size() * w, 0.0);
  const auto delay_samples = std::llround(delay_s * fs_);
  for (std::size_t r = 0; r < timestamps_.size(); ++r) {
    const long long e = std::llround((timestamps_[r] - t0_) * fs_) - delay_samples;
    const auto end = static_cast<std::size_t>(std::clamp<long long>(e, 0, static_cast<long long>(horizon_) - 1));
    compute_row(end, m.data.data() + r * w, r > 0 ? m.data.data() + (r - 1) * w : nullptr);
  }
  for (double v : m.data)
    if (!std::isfinite(v)) throw Error(Errc::internal, "non-finite feature value");
  return m;
}

FeatureMatrix build_feature_frames(const corpus::Recording& rec, std::span<const double> timestamps,
                                   const WindowConfig& cfg) {
  auto ex = std::make_shared<const FeatureExtractor>(rec, std::vector<double>(timestamps.begin(), timestamps.end()), cfg);
  auto m = ex->build(0.0);
  m.source = std::move(ex);
  return m;
}

FeatureMatrix shift_features(const FeatureMatrix& matrix, double delay_s) {
  if (!matrix.source) throw Error(Errc::invalid_argument, "feature matrix carries no source recording");
  auto m = matrix.source->build(delay_s);
  m.source = matrix.source;
  return m;
}

}  // namespace affectfuse::features

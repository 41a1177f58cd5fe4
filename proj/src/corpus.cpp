#include "affectfuse/corpus.hpp"

#include "affectfuse/dsp.hpp"
#include "affectfuse/error.hpp"
#include "csv.hpp"
#include "rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <set>

namespace fs = std::filesystem;

namespace affectfuse::corpus {

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::across_time: return "across_time";
    case Scenario::across_subject: return "across_subject";
    case Scenario::across_elicitor: return "across_elicitor";
    case Scenario::across_version: return "across_version";
  }
  return "unknown";
}

std::optional<Scenario> parse_scenario(std::string_view text) {
  for (int k = 1; k <= 4; ++k) {
    const auto s = static_cast<Scenario>(k);
    if (text == scenario_name(s) || text == std::to_string(k) || text == fmt::format("scenario_{}", k)) return s;
  }
  if (text == "across-time") return Scenario::across_time;
  if (text == "across-subject") return Scenario::across_subject;
  if (text == "across-elicitor") return Scenario::across_elicitor;
  if (text == "across-version") return Scenario::across_version;
  return std::nullopt;
}

std::string_view split_name(Split s) { return s == Split::train ? "train" : "test"; }

std::string DatasetEntry::file_name() const { return make_file_name(subject_id, video_id); }

std::string DatasetEntry::key() const {
  return fmt::format("scenario_{}/fold_{}/{}/sub_{}_vid_{}", static_cast<int>(scenario), fold, split_name(split),
                     subject_id, video_id);
}

std::vector<const DatasetEntry*> DatasetIndex::select(Scenario s) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries)
    if (e.scenario == s) out.push_back(&e);
  return out;
}

std::vector<const DatasetEntry*> DatasetIndex::select(Scenario s, int fold, Split split) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries)
    if (e.scenario == s && e.fold == fold && e.split == split) out.push_back(&e);
  return out;
}

std::vector<int> DatasetIndex::folds(Scenario s) const {
  std::set<int> f;
  for (const auto& e : entries)
    if (e.scenario == s) f.insert(e.fold);
  return {f.begin(), f.end()};
}

std::optional<std::pair<int, int>> parse_file_name(std::string_view name) {
  static const std::regex pattern(R"(^sub_(\d+)_vid_(\d+)\.csv$)");
  std::cmatch m;
  if (!std::regex_match(name.begin(), name.end(), m, pattern)) return std::nullopt;
  return std::make_pair(std::stoi(m[1].str()), std::stoi(m[2].str()));
}

std::string make_file_name(int subject_id, int video_id) { return fmt::format("sub_{}_vid_{}.csv", subject_id, video_id); }

namespace {

double median_of(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

const std::vector<double>& require_column(const csv::Table& t, std::string_view name, const fs::path& path) {
  const int idx = t.find(name);
  if (idx < 0) throw Error(Errc::missing_column, fmt::format("missing column '{}' in {}", name, path.string()));
  return t.columns[static_cast<std::size_t>(idx)];
}

void require_finite(const std::vector<double>& col, std::string_view name, const fs::path& path) {
  for (std::size_t r = 0; r < col.size(); ++r)
    if (!std::isfinite(col[r]))
      throw Error(Errc::non_finite_sample,
                  fmt::format("non-finite sample at row {} column '{}' in {}", r, name, path.string()));
}

void apply_file_ids(const fs::path& path, int& subject, int& video) {
  if (auto ids = parse_file_name(path.filename().string())) {
    subject = ids->first;
    video = ids->second;
  }
}

std::string format_time(double seconds, TimeUnit unit) {
  // Integral millisecond stamps print without a fraction.
  if (unit == TimeUnit::milliseconds) {
    const double ms = seconds * 1000.0;
    const double rounded = std::round(ms);
    return csv::format_double(std::abs(ms - rounded) < 1e-6 ? rounded : ms);
  }
  return csv::format_double(seconds);
}

}  // namespace

Recording load_recording(const fs::path& path) {
  const auto table = csv::read_numeric(path);
  const auto& time = require_column(table, "time", path);
  Recording rec;
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    rec.channels[c] = require_column(table, kChannelNames[c], path);
  }
  if (table.rows == 0) throw Error(Errc::empty_input, fmt::format("{} has no samples", path.string()));
  require_finite(time, "time", path);
  for (std::size_t c = 0; c < kChannelCount; ++c) require_finite(rec.channels[c], kChannelNames[c], path);

  double scale = 1.0;
  if (table.rows >= 2) {
    std::vector<double> deltas(table.rows - 1);
    for (std::size_t i = 1; i < table.rows; ++i) deltas[i - 1] = time[i] - time[i - 1];
    const double med = median_of(deltas);
    if (med > 0.1) {
      scale = 1e-3;
      rec.time_unit = TimeUnit::milliseconds;
    }
    const double fs_inferred = 1.0 / (med * scale);
    if (!(std::abs(fs_inferred - kSampleRate) <= 0.1 * kSampleRate))
      throw Error(Errc::non_uniform_sampling,
                  fmt::format("{}: inferred sample rate {} Hz, expected {} Hz", path.string(), fs_inferred, kSampleRate));
    const double expected = 1.0 / kSampleRate;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      if (std::abs(deltas[i] * scale - expected) > 0.1 * expected)
        throw Error(Errc::non_uniform_sampling,
                    fmt::format("{}: sample spacing {} s at row {} deviates from {} s", path.string(), deltas[i] * scale,
                                i + 1, expected));
    }
  } else if (time[0] > 1e3) {
    scale = 1e-3;
    rec.time_unit = TimeUnit::milliseconds;
  }
  rec.t0 = scale == 1.0 ? time[0] : time[0] / 1000.0;
  rec.sample_rate = kSampleRate;
  apply_file_ids(path, rec.subject_id, rec.video_id);
  return rec;
}

AnnotationTrack load_annotations(const fs::path& path) {
  const auto table = csv::read_numeric(path);
  const auto& time = require_column(table, "time", path);
  AnnotationTrack track;
  track.valence = require_column(table, "valence", path);
  track.arousal = require_column(table, "arousal", path);
  if (table.rows == 0) throw Error(Errc::empty_input, fmt::format("{} has no annotation rows", path.string()));
  require_finite(time, "time", path);
  require_finite(track.valence, "valence", path);
  require_finite(track.arousal, "arousal", path);
  for (std::size_t r = 0; r < table.rows; ++r) {
    for (auto [name, col] : {std::pair{"valence", &track.valence}, std::pair{"arousal", &track.arousal}}) {
      const double v = (*col)[r];
      if (v < kRatingMin || v > kRatingMax)
        throw Error(Errc::range_violation,
                    fmt::format("{} {} outside [{}, {}] at row {} in {}", name, v, kRatingMin, kRatingMax, r, path.string()));
    }
  }
  bool millis = false;
  if (table.rows >= 2) {
    std::vector<double> deltas(table.rows - 1);
    for (std::size_t i = 1; i < table.rows; ++i) deltas[i - 1] = time[i] - time[i - 1];
    millis = median_of(deltas) > 1.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const double step = millis ? deltas[i] / 1000.0 : deltas[i];
      if (std::abs(step - kAnnotationStep) > 1e-6)
        throw Error(Errc::non_uniform_sampling,
                    fmt::format("{}: annotation spacing {} s at row {} is not {} s", path.string(), step, i + 1,
                                kAnnotationStep));
    }
  } else {
    millis = time[0] > 1e3;
  }
  track.time_unit = millis ? TimeUnit::milliseconds : TimeUnit::seconds;
  track.timestamps.resize(table.rows);
  for (std::size_t r = 0; r < table.rows; ++r) track.timestamps[r] = millis ? time[r] / 1000.0 : time[r];
  apply_file_ids(path, track.subject_id, track.video_id);
  return track;
}

void save_recording(const Recording& rec, const fs::path& path) {
  std::string out = "time";
  for (auto name : kChannelNames) {
    out += ',';
    out += name;
  }
  out += '\n';
  out.reserve(rec.size() * 96);
  const double t0_ms = rec.t0 * 1000.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (rec.time_unit == TimeUnit::milliseconds) {
      out += format_time((t0_ms + static_cast<double>(i) * 1000.0 / rec.sample_rate) / 1000.0, rec.time_unit);
    } else {
      out += csv::format_double(rec.t0 + static_cast<double>(i) / rec.sample_rate);
    }
    for (std::size_t c = 0; c < kChannelCount; ++c) {
      out += ',';
      out += csv::format_double(rec.channels[c][i]);
    }
    out += '\n';
  }
  csv::write_text(path, out);
}

void save_annotations(const AnnotationTrack& track, const fs::path& path) {
  std::string out = "time,valence,arousal\n";
  for (std::size_t i = 0; i < track.size(); ++i) {
    out += format_time(track.timestamps[i], track.time_unit);
    out += ',';
    out += csv::format_double(track.valence[i]);
    out += ',';
    out += csv::format_double(track.arousal[i]);
    out += '\n';
  }
  csv::write_text(path, out);
}

void check_pairing(const Recording& rec, const AnnotationTrack& track) {
  if (track.size() == 0) return;
  const double half = 0.5 / rec.sample_rate;
  const double first = track.timestamps.front(), last = track.timestamps.back();
  if (first < rec.t0 - half || last > rec.end_time() + half)
    throw Error(Errc::timestamp_out_of_range,
                fmt::format("annotations span [{}, {}] s outside recording [{}, {}] s", first, last, rec.t0, rec.end_time()));
}

namespace {

struct SplitFiles {
  std::map<std::pair<int, int>, fs::path> physiology;
  std::map<std::pair<int, int>, fs::path> annotations;
};

std::map<std::pair<int, int>, fs::path> list_csvs(const fs::path& dir) {
  std::map<std::pair<int, int>, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const auto name = de.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const auto ids = parse_file_name(p.filename().string());
    if (!ids) throw Error(Errc::malformed_name, fmt::format("malformed file name {}", p.string()));
    out.emplace(*ids, p);
  }
  return out;
}

void collect_split(DatasetIndex& index, Scenario scenario, int fold, Split split, const fs::path& dir) {
  const auto phys = list_csvs(dir / "physiology");
  const auto ann = list_csvs(dir / "annotations");
  for (const auto& [ids, path] : ann) {
    if (!phys.count(ids)) throw Error(Errc::orphan_file, fmt::format("annotation without physiology: {}", path.string()));
  }
  for (const auto& [ids, path] : phys) {
    DatasetEntry e;
    e.scenario = scenario;
    e.fold = fold;
    e.split = split;
    e.subject_id = ids.first;
    e.video_id = ids.second;
    e.physiology = path;
    if (auto it = ann.find(ids); it != ann.end()) {
      e.annotations = it->second;
    } else if (split == Split::train) {
      throw Error(Errc::orphan_file, fmt::format("physiology without annotation: {}", path.string()));
    }
    index.entries.push_back(std::move(e));
  }
}

void collect_fold(DatasetIndex& index, Scenario scenario, int fold, const fs::path& dir) {
  collect_split(index, scenario, fold, Split::train, dir / "train");
  collect_split(index, scenario, fold, Split::test, dir / "test");
}

}  // namespace

DatasetIndex enumerate_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(Errc::io_error, fmt::format("dataset root {} is not a directory", root.string()));
  static const std::regex scenario_re(R"(^scenario_([1-4])$)");
  static const std::regex fold_re(R"(^fold_(\d+)$)");
  DatasetIndex index;
  index.root = root;
  std::vector<fs::path> scenario_dirs;
  for (const auto& de : fs::directory_iterator(root))
    if (de.is_directory()) scenario_dirs.push_back(de.path());
  std::sort(scenario_dirs.begin(), scenario_dirs.end());
  for (const auto& sdir : scenario_dirs) {
    std::smatch m;
    const auto name = sdir.filename().string();
    if (!std::regex_match(name, m, scenario_re)) continue;
    const auto scenario = static_cast<Scenario>(std::stoi(m[1].str()));
    if (fs::is_directory(sdir / "train") || fs::is_directory(sdir / "test")) collect_fold(index, scenario, 0, sdir);
    std::vector<std::pair<int, fs::path>> folds;
    for (const auto& de : fs::directory_iterator(sdir)) {
      const auto fname = de.path().filename().string();
      std::smatch fm;
      if (de.is_directory() && std::regex_match(fname, fm, fold_re)) folds.emplace_back(std::stoi(fm[1].str()), de.path());
    }
    std::sort(folds.begin(), folds.end());
    for (const auto& [fold, fdir] : folds) collect_fold(index, scenario, fold, fdir);
  }
  std::sort(index.entries.begin(), index.entries.end(), [](const DatasetEntry& a, const DatasetEntry& b) {
    return std::tie(a.scenario, a.fold, a.split, a.subject_id, a.video_id) <
           std::tie(b.scenario, b.fold, b.split, b.subject_id, b.video_id);
  });
  for (std::size_t i = 1; i < index.entries.size(); ++i) {
    const auto& a = index.entries[i - 1];
    const auto& b = index.entries[i];
    if (std::tie(a.scenario, a.fold, a.split, a.subject_id, a.video_id) ==
        std::tie(b.scenario, b.fold, b.split, b.subject_id, b.video_id))
      throw Error(Errc::invalid_spec, fmt::format("duplicate dataset entry {}", a.key()));
  }
  return index;
}

// ---------------------------------------------------------------------------
// Synthesis

void SynthesisSpec::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::invalid_spec, "synthesis spec: " + why); };
  if (subjects < 1) fail("subjects must be >= 1");
  if (videos < 1) fail("videos must be >= 1");
  if (!(duration_s >= 2.0)) fail("duration must be >= 2 s");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train_fraction must be in (0, 1)");
  if (!(gap_s >= 0.0)) fail("gap must be >= 0");
  if (!(coupling_gain >= 0.0)) fail("coupling_gain must be >= 0");
  if (!(noise_level >= 0.0)) fail("noise_level must be >= 0");
  if (!(affect_sd >= 0.0)) fail("affect_sd must be >= 0");
  if (!(affect_period_s > 0.0)) fail("affect_period must be > 0");
  if (!(affect_damping > 0.0)) fail("affect_damping must be > 0");
  if (!(label_lag_s >= 0.0 && label_lag_s < duration_s / 2)) fail("label_lag must be in [0, duration/2)");
  if (!(fast_valence_amplitude >= 0.0)) fail("fast_valence_amplitude must be >= 0");
  if (!(fast_valence_bandwidth_hz > 0.0 && fast_valence_bandwidth_hz < 500.0)) fail("fast_valence_bandwidth must be in (0, 500) Hz");
  for (auto s : scenarios) {
    if (s == Scenario::across_subject && subjects < 2) fail("across_subject needs >= 2 subjects");
    if (s == Scenario::across_elicitor && videos < 4) fail("across_elicitor needs >= 4 videos");
    if (s == Scenario::across_version && videos < 8) fail("across_version needs >= 8 videos");
  }
  const double train_part = duration_s * train_fraction;
  if (train_part < 1.0 || duration_s - train_part - gap_s < 1.0) fail("across-time parts must each span >= 1 s");
}

namespace {

constexpr double kDt = 1.0 / kSampleRate;

double quantize(double v) { return std::round(v * 1e6) / 1e6; }

std::vector<double> oscillator(std::mt19937_64& rng, std::size_t n, double period_s, double damping) {
  const double w = 2.0 * std::numbers::pi / period_s;
  std::normal_distribution<double> nd(0.0, 1.0);
  double x = 0.0, v = 0.0;
  const double drive = 1.0 / std::sqrt(kDt);
  auto step = [&] {
    v += kDt * (-2.0 * damping * w * v - w * w * x + drive * nd(rng));
    x += kDt * v;
  };
  const auto burn_in = static_cast<std::size_t>(4.0 * period_s * kSampleRate);
  for (std::size_t i = 0; i < burn_in; ++i) step();
  std::vector<double> out(n);
  for (auto& o : out) {
    step();
    o = x;
  }
  return out;
}

void normalise(std::vector<double>& x, double target_sd) {
  if (x.empty()) return;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size()));
  for (auto& v : x) v = sd > 0.0 ? (v - mean) / sd * target_sd : 0.0;
}

// Base rating per video: four quadrants cycled over video ids.
std::pair<double, double> video_base(int video_id) {
  switch (((video_id % 4) + 4) % 4) {
    case 0: return {6.5, 6.5};  // HV, HA
    case 1: return {3.5, 6.5};  // LV, HA
    case 2: return {3.5, 3.5};  // LV, LA
    default: return {6.5, 3.5};  // HV, LA
  }
}

// Sum of a few slow random sinusoids.
std::vector<double> slow_wobble(std::mt19937_64& rng, std::size_t n, double amplitude, double fmin, double fmax) {
  std::uniform_real_distribution<double> uf(fmin, fmax), up(0.0, 2.0 * std::numbers::pi);
  std::array<std::pair<double, double>, 3> comps{};
  for (auto& c : comps) c = {uf(rng), up(rng)};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * kDt;
    double s = 0.0;
    for (auto [f, p] : comps) s += std::sin(2.0 * std::numbers::pi * f * t + p);
    out[i] = amplitude * s / 3.0;
  }
  return out;
}

// Beat/breath event times from an instantaneous rate (events per minute).
std::vector<double> integrate_events(const std::vector<double>& rate_per_min, double start_phase) {
  std::vector<double> events;
  double phase = start_phase;
  for (std::size_t i = 0; i < rate_per_min.size(); ++i) {
    const double inc = rate_per_min[i] / 60.0 * kDt;
    const double next = phase + inc;
    if (std::floor(next) > std::floor(phase)) {
      const double frac = (std::floor(next) - phase) / inc;
      events.push_back((static_cast<double>(i) + frac) * kDt);
    }
    phase = next;
  }
  return events;
}

void add_gaussian(std::vector<double>& x, double centre_s, double amplitude, double sigma_s) {
  const auto n = static_cast<long long>(x.size());
  const long long lo = std::max(0LL, static_cast<long long>(std::floor((centre_s - 5 * sigma_s) * kSampleRate)));
  const long long hi = std::min(n - 1, static_cast<long long>(std::ceil((centre_s + 5 * sigma_s) * kSampleRate)));
  for (long long i = lo; i <= hi; ++i) {
    const double d = (static_cast<double>(i) * kDt - centre_s) / sigma_s;
    x[static_cast<std::size_t>(i)] += amplitude * std::exp(-0.5 * d * d);
  }
}

}  // namespace

LatentAffect synthesize_latent(const SynthesisSpec& spec, std::uint64_t seed, int subject_id, int video_id,
                               std::size_t samples) {
  const std::uint64_t latent_seed = spec.latent_seed.value_or(rng::derive(seed, 0x1a7e17u));
  std::mt19937_64 gen(rng::derive(latent_seed, static_cast<std::uint64_t>(subject_id),
                                  static_cast<std::uint64_t>(video_id), 1));
  std::normal_distribution<double> offset(0.0, 0.3);
  auto [vb, ab] = video_base(video_id);
  vb += offset(gen);
  ab += offset(gen);
  auto xv = oscillator(gen, samples, spec.affect_period_s, spec.affect_damping);
  auto xa = oscillator(gen, samples, spec.affect_period_s, spec.affect_damping);
  normalise(xv, spec.affect_sd);
  normalise(xa, spec.affect_sd);

  std::vector<double> fast(samples, 0.0);
  if (spec.fast_valence_amplitude > 0.0 && samples > 64) {
    std::normal_distribution<double> nd(0.0, 1.0);
    dsp::Signal white{std::vector<double>(samples), kSampleRate};
    for (auto& v : white.samples) v = nd(gen);
    fast = dsp::iir_filter(white, dsp::FilterSpec::lowpass(spec.fast_valence_bandwidth_hz)).samples;
    normalise(fast, spec.fast_valence_amplitude);
  }

  LatentAffect out;
  out.valence.resize(samples);
  out.arousal.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    out.valence[i] = std::clamp(vb + xv[i] + fast[i], kRatingMin, kRatingMax);
    out.arousal[i] = std::clamp(ab + xa[i], kRatingMin, kRatingMax);
  }
  return out;
}

Recording synthesize_recording(const LatentAffect& latent, double gain, double noise_level, std::uint64_t seed) {
  const std::size_t n = latent.valence.size();
  std::mt19937_64 gen(rng::derive(seed, 0x5195u));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Recording rec;
  for (auto& ch : rec.channels) ch.assign(n, 0.0);
  const auto& v = latent.valence;
  const auto& a = latent.arousal;

  // Cardiac: heart rate follows arousal.
  const auto hrv = slow_wobble(gen, n, 2.0, 0.05, 0.3);
  std::vector<double> hr(n);
  for (std::size_t i = 0; i < n; ++i) hr[i] = 70.0 + gain * 6.0 * (a[i] - 5.0) + hrv[i];
  const auto beats = integrate_events(hr, unit(gen));
  auto& ecg = rec.channel(Channel::ecg);
  auto& bvp = rec.channel(Channel::bvp);
  for (double tb : beats) {
    add_gaussian(ecg, tb - 0.16, 0.12, 0.02);
    add_gaussian(ecg, tb - 0.03, -0.10, 0.008);
    add_gaussian(ecg, tb, 1.0, 0.01);
    add_gaussian(ecg, tb + 0.03, -0.20, 0.008);
    add_gaussian(ecg, tb + 0.25, 0.30, 0.04);
    add_gaussian(bvp, tb + 0.25, 1.0, 0.07);
    add_gaussian(bvp, tb + 0.55, 0.35, 0.10);
  }

  // Respiration: breathing rate and depth follow arousal.
  const auto brv = slow_wobble(gen, n, 0.5, 0.02, 0.1);
  std::vector<double> br(n);
  for (std::size_t i = 0; i < n; ++i) br[i] = 15.0 + gain * 2.0 * (a[i] - 5.0) + brv[i];
  {
    auto& rsp = rec.channel(Channel::rsp);
    double phase = unit(gen);
    for (std::size_t i = 0; i < n; ++i) {
      phase += br[i] / 60.0 * kDt;
      const double depth = 1.0 + gain * 0.05 * (a[i] - 5.0);
      rsp[i] = depth * std::sin(2.0 * std::numbers::pi * phase);
    }
  }

  // EDA: tonic level and SCR rate follow arousal.
  {
    auto& gsr = rec.channel(Channel::gsr);
    for (std::size_t i = 0; i < n; ++i) gsr[i] = 4.0 + gain * 0.5 * (a[i] - 5.0);
    std::uniform_real_distribution<double> amp(0.05, 0.15);
    const double rise = 0.75, decay = 2.0;
    const double t_peak = std::log(decay / rise) * rise * decay / (decay - rise);
    const double norm = std::exp(-t_peak / decay) - std::exp(-t_peak / rise);
    for (std::size_t i = 0; i < n; ++i) {
      const double rate = 0.03 + gain * 0.03 * std::max(0.0, a[i] - 3.0);
      if (unit(gen) < rate * kDt) {
        const double height = amp(gen);
        const std::size_t len = std::min(n - i, static_cast<std::size_t>(15.0 * kSampleRate));
        for (std::size_t k = 0; k < len; ++k) {
          const double t = static_cast<double>(k) * kDt;
          gsr[i + k] += height * (std::exp(-t / decay) - std::exp(-t / rise)) / norm;
        }
      }
    }
  }

  // Skin temperature: slow drift plus valence.
  {
    auto& skt = rec.channel(Channel::skt);
    const double phase = unit(gen) * 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * kDt;
      skt[i] = 33.0 + gain * 0.5 * (v[i] - 5.0) + 0.05 * std::sin(2.0 * std::numbers::pi * t / 90.0 + phase);
    }
  }

  // EMG: broadband bursts scaled by valence (zygomaticus up, corrugator down)
  // and arousal (trapezius), on a noise floor with mains hum.
  for (auto ch : {Channel::emg_zygo, Channel::emg_coru, Channel::emg_trap}) {
    auto& emg = rec.channel(ch);
    bool on = unit(gen) < 0.5;
    double next_switch = -std::log(1.0 - unit(gen)) * 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * kDt;
      while (t >= next_switch) {
        on = !on;
        next_switch += -std::log(1.0 - unit(gen)) * 0.5;
      }
      double drive = 0.0;
      if (ch == Channel::emg_zygo) drive = 0.6 * std::max(0.0, v[i] - 5.0);
      if (ch == Channel::emg_coru) drive = 0.6 * std::max(0.0, 5.0 - v[i]);
      if (ch == Channel::emg_trap) drive = 0.4 * std::max(0.0, a[i] - 5.0);
      const double gate = on ? 1.0 : 0.4;
      emg[i] = gain * drive * gate * nd(gen) + 0.03 * std::sin(2.0 * std::numbers::pi * 60.0 * t) +
               0.01 * std::sin(2.0 * std::numbers::pi * 120.0 * t);
    }
  }

  // Sensor noise.
  const std::array<double, kChannelCount> noise_sd = {0.01, 0.01, 0.002, 0.02, 0.003, 0.05, 0.05, 0.05};
  for (std::size_t c = 0; c < kChannelCount; ++c) {
    for (auto& s : rec.channels[c]) s = quantize(s + noise_level * noise_sd[c] * nd(gen));
  }
  rec.sample_rate = kSampleRate;
  rec.time_unit = TimeUnit::milliseconds;
  return rec;
}

namespace {

Recording slice_recording(const Recording& rec, std::size_t begin, std::size_t end) {
  Recording out = rec;
  for (std::size_t c = 0; c < kChannelCount; ++c)
    out.channels[c].assign(rec.channels[c].begin() + static_cast<std::ptrdiff_t>(begin),
                           rec.channels[c].begin() + static_cast<std::ptrdiff_t>(end));
  out.t0 = rec.t0 + static_cast<double>(begin) / rec.sample_rate;
  return out;
}

AnnotationTrack slice_track(const AnnotationTrack& track, double t_begin, double t_end) {
  AnnotationTrack out;
  out.subject_id = track.subject_id;
  out.video_id = track.video_id;
  out.time_unit = track.time_unit;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const double t = track.timestamps[i];
    if (t >= t_begin - 1e-9 && t <= t_end + 1e-9) {
      out.timestamps.push_back(t);
      out.valence.push_back(track.valence[i]);
      out.arousal.push_back(track.arousal[i]);
    }
  }
  return out;
}

void write_pair(const fs::path& dir, const Recording& rec, const AnnotationTrack& track) {
  const auto name = make_file_name(rec.subject_id, rec.video_id);
  save_recording(rec, dir / "physiology" / name);
  save_annotations(track, dir / "annotations" / name);
}

}  // namespace

DatasetIndex generate_synthetic_dataset(std::uint64_t seed, const SynthesisSpec& spec, const fs::path& root) {
  spec.validate();
  const auto samples = static_cast<std::size_t>(std::llround(spec.duration_s * kSampleRate));
  const auto step = static_cast<std::size_t>(std::llround(kAnnotationStep * kSampleRate));

  struct Item {
    Recording rec;
    AnnotationTrack track;
  };
  std::vector<Item> items;
  for (int s = 1; s <= spec.subjects; ++s) {
    for (int vid = 0; vid < spec.videos; ++vid) {
      const auto latent = synthesize_latent(spec, seed, s, vid, samples);
      Item item;
      item.rec = synthesize_recording(latent, spec.coupling_gain, spec.noise_level,
                                      rng::derive(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(vid), 2));
      item.rec.subject_id = s;
      item.rec.video_id = vid;
      item.track.subject_id = s;
      item.track.video_id = vid;
      item.track.time_unit = TimeUnit::milliseconds;
      const auto lag = static_cast<long long>(std::llround(spec.label_lag_s * kSampleRate));
      for (std::size_t i = 0; i < samples; i += step) {
        const auto src = static_cast<std::size_t>(std::clamp<long long>(static_cast<long long>(i) - lag, 0,
                                                                        static_cast<long long>(samples) - 1));
        item.track.timestamps.push_back(static_cast<double>(i) / kSampleRate);
        item.track.valence.push_back(quantize(latent.valence[src]));
        item.track.arousal.push_back(quantize(latent.arousal[src]));
      }
      items.push_back(std::move(item));
    }
  }

  for (auto scenario : spec.scenarios) {
    const fs::path sdir = root / fmt::format("scenario_{}", static_cast<int>(scenario));
    switch (scenario) {
      case Scenario::across_time: {
        const std::size_t split = static_cast<std::size_t>(std::llround(spec.duration_s * spec.train_fraction / kAnnotationStep)) * step;
        const std::size_t test_begin =
            split + static_cast<std::size_t>(std::llround(spec.gap_s / kAnnotationStep)) * step;
        for (const auto& it : items) {
          const auto train = slice_recording(it.rec, 0, split);
          const auto test = slice_recording(it.rec, test_begin, samples);
          write_pair(sdir / "fold_0" / "train", train, slice_track(it.track, train.t0, train.end_time()));
          write_pair(sdir / "fold_0" / "test", test, slice_track(it.track, test.t0, test.end_time()));
        }
        break;
      }
      case Scenario::across_subject: {
        const int folds = std::min(5, spec.subjects);
        for (int f = 0; f < folds; ++f) {
          for (const auto& it : items) {
            const int group = (it.rec.subject_id - 1) * folds / spec.subjects;
            write_pair(sdir / fmt::format("fold_{}", f) / (group == f ? "test" : "train"), it.rec, it.track);
          }
        }
        break;
      }
      case Scenario::across_elicitor: {
        for (int f = 0; f < 4; ++f) {
          for (const auto& it : items) {
            const int group = it.rec.video_id % 4;
            write_pair(sdir / fmt::format("fold_{}", f) / (group == f ? "test" : "train"), it.rec, it.track);
          }
        }
        break;
      }
      case Scenario::across_version: {
        for (int f = 0; f < 2; ++f) {
          for (const auto& it : items) {
            const int version = (it.rec.video_id / 4) % 2;
            write_pair(sdir / fmt::format("fold_{}", f) / (version == f ? "train" : "test"), it.rec, it.track);
          }
        }
        break;
      }
    }
  }
  return enumerate_dataset(root);
}

}  // namespace affectfuse::corpus

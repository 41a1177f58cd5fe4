#include "affectfuse/corpus.hpp"
#include "affectfuse/error.hpp"
#include "affectfuse/features.hpp"
#include "doctest.h"
#include "fixtures.hpp"

#include <chrono>

using namespace affectfuse;
using namespace affectfuse::features;
using corpus::Channel;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::ok;
}

std::vector<double> grid(double start, double stop, double step = 0.05) {
  std::vector<double> t;
  for (int k = 0;; ++k) {
    const double v = start + k * step;
    if (v > stop + 1e-9) break;
    t.push_back(v);
  }
  return t;
}

corpus::Recording synthetic_recording(double seconds, double arousal = 6.0, double valence = 6.0,
                                      std::uint64_t seed = 21) {
  const auto n = static_cast<std::size_t>(seconds * 1000);
  corpus::LatentAffect latent;
  latent.valence.assign(n, valence);
  latent.arousal.assign(n, arousal);
  auto rec = corpus::synthesize_recording(latent, 1.0, 1.0, seed);
  rec.subject_id = 1;
  rec.video_id = 2;
  return rec;
}

corpus::Recording flat_recording(std::size_t n, double value = 0.0) {
  corpus::Recording rec;
  for (auto& ch : rec.channels) ch.assign(n, value);
  return rec;
}

void add_spike(std::vector<double>& x, std::size_t centre, double amplitude = 1.0) {
  for (int d = -30; d <= 30; ++d) {
    const auto i = static_cast<long long>(centre) + d;
    if (i < 0 || i >= static_cast<long long>(x.size())) continue;
    x[static_cast<std::size_t>(i)] += amplitude * std::exp(-0.5 * (d / 8.0) * (d / 8.0));
  }
}

std::size_t col(const FeatureMatrix& m, std::string_view name) {
  const int c = m.find(name);
  REQUIRE_MESSAGE(c >= 0, name);
  return static_cast<std::size_t>(c);
}

}  // namespace

TEST_CASE("clean_emg rejects mains and tracks bursts") {
  SUBCASE("pure 60 Hz") {
    const auto env = clean_emg({fixtures::sine(60.0, 1000.0, 10.0), 1000.0});
    CHECK(fixtures::mean(env.samples) < 0.05);
  }
  SUBCASE("zero signal") {
    const auto env = clean_emg({std::vector<double>(5000, 0.0), 1000.0});
    for (double v : env.samples) REQUIRE(v == 0.0);
  }
  SUBCASE("burst contrast") {
    auto x = fixtures::white_noise(6000, 3);
    for (std::size_t i = 2000; i < 3000; ++i) x[i] *= 10.0;
    const auto env = clean_emg({x, 1000.0});
    REQUIRE(env.size() == x.size());
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < env.size(); ++i) ((i >= 2000 && i < 3000) ? in : out) += env.samples[i];
    in /= 1000.0;
    out /= 5000.0;
    CHECK(in >= 3.0 * out);
    for (double v : env.samples) REQUIRE(v >= 0.0);
  }
}

TEST_CASE("rate_track_from_peaks") {
  SUBCASE("uniform IBI") {
    std::vector<std::size_t> peaks;
    for (std::size_t p = 500; p < 10000; p += 1000) peaks.push_back(p);
    const auto track = rate_track_from_peaks(peaks, 10000, 1000.0);
    for (double v : track.samples) REQUIRE(v == doctest::Approx(60.0));
  }
  SUBCASE("alternating 0.5 s / 1.0 s") {
    const std::vector<std::size_t> peaks = {0, 500, 1500, 2000, 3000};
    const auto t = rate_track_from_peaks(peaks, 3500, 1000.0).samples;
    // Peak rates: 120 (first takes the first IBI), 120, 60, 120, 60.
    CHECK(t[0] == doctest::Approx(120.0));
    CHECK(t[250] == doctest::Approx(120.0));
    CHECK(t[500] == doctest::Approx(120.0));
    CHECK(t[1000] == doctest::Approx(90.0));
    CHECK(t[1500] == doctest::Approx(60.0));
    CHECK(t[1750] == doctest::Approx(90.0));
    CHECK(t[2000] == doctest::Approx(120.0));
    CHECK(t[2250] == doctest::Approx(105.0));
    CHECK(t[3000] == doctest::Approx(60.0));
    CHECK(t[3499] == doctest::Approx(60.0));
    for (double v : t) REQUIRE(v > 0.0);
  }
  SUBCASE("too few peaks") {
    const std::vector<std::size_t> one = {10};
    CHECK(code_of([&] { rate_track_from_peaks(one, 100, 1000.0); }) == Errc::too_few_peaks);
  }
}

TEST_CASE("eda_decompose") {
  SUBCASE("constant") {
    const auto c = eda_decompose({std::vector<double>(20000, 3.5), 1000.0});
    for (std::size_t i = 0; i < 20000; ++i) {
      REQUIRE(c.tonic.samples[i] == doctest::Approx(3.5).epsilon(1e-9));
      REQUIRE(std::abs(c.phasic.samples[i]) < 1e-9);
    }
  }
  SUBCASE("ramp plus bump") {
    const std::size_t n = 60000;
    std::vector<double> x(n), bump(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = i / 1000.0;
      x[i] = 2.0 + 0.01 * t;
      const double u = t - 30.0;
      if (u > 0) bump[i] = 0.2 * (std::exp(-u / 0.3) - std::exp(-u / 0.1));  // fast SCR shape
      x[i] += bump[i];
    }
    const auto c = eda_decompose({x, 1000.0});
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += c.phasic.samples[i] * bump[i];
      den += bump[i] * bump[i];
    }
    CHECK(num / den >= 0.9);
  }
  SUBCASE("reconstruction") {
    const auto x = fixtures::white_noise(30000, 8);
    const auto c = eda_decompose({x, 1000.0});
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(c.tonic.samples[i] + c.phasic.samples[i] - x[i]) <= 1e-9);
  }
}

TEST_CASE("extract_features on hand-built windows") {
  SUBCASE("constant 60/min BVP") {
    std::vector<double> sig(12000, 0.0);
    std::vector<std::size_t> peaks;
    for (std::size_t p = 300; p < 12000; p += 1000) peaks.push_back(p);
    const auto v = extract_features(FeatureKind::bvp, {sig, 1000, 10999, peaks, {}, 1000.0});
    REQUIRE(v);
    REQUIRE(v->size() == 10);
    CHECK((*v)[0] == doctest::Approx(60.0));  // baseline
    CHECK((*v)[3] == doctest::Approx(60.0));  // mean
    CHECK((*v)[4] == doctest::Approx(0.0));   // sd
    CHECK(std::abs((*v)[7]) < 1e-9);          // trend linear
    CHECK((*v)[9] == 0.0);                    // r2 convention
  }
  SUBCASE("single peak leaves the rate undefined") {
    std::vector<double> sig(5000, 0.0);
    const std::vector<std::size_t> peaks = {100, 4900};
    CHECK_FALSE(extract_features(FeatureKind::ecg, {sig, 1000, 4000, peaks, {}, 1000.0}));
  }
  SUBCASE("quiet EDA") {
    std::vector<double> phasic(4000, 0.0);
    const auto v = extract_features(FeatureKind::eda, {phasic, 0, 3999, {}, {}, 1000.0});
    REQUIRE(v);
    REQUIRE(v->size() == 6);
    for (double f : *v) CHECK(f == 0.0);
  }
  SUBCASE("one SCR") {
    std::vector<double> phasic(4000, 0.0);
    for (std::size_t i = 1000; i < 4000; ++i) {
      const double u = (i - 1000) / 1000.0;
      phasic[i] = 0.5 * (std::exp(-u / 1.0) - std::exp(-u / 0.2));
    }
    const auto peak = static_cast<std::size_t>(std::max_element(phasic.begin(), phasic.end()) - phasic.begin());
    const std::vector<std::size_t> peaks = {peak}, onsets = {1000};
    const auto v = *extract_features(FeatureKind::eda, {phasic, 0, 3999, peaks, onsets, 1000.0});
    CHECK(v[1] == 1.0);
    CHECK(v[2] == doctest::Approx(phasic[peak]));
    CHECK(v[3] == doctest::Approx(peak / 1000.0));
    CHECK(v[4] == doctest::Approx((peak - 1000) / 1000.0));
    std::size_t half = peak;
    while (phasic[half] > 0.5 * phasic[peak]) ++half;
    CHECK(v[5] == doctest::Approx((half - peak) / 1000.0));
  }
  SUBCASE("EMG bursts") {
    std::vector<double> env(1000, 0.2);
    for (std::size_t i = 100; i < 200; ++i) env[i] = 2.0;
    for (std::size_t i = 600; i < 650; ++i) env[i] = 3.0;
    const auto v = *extract_features(FeatureKind::emg, {env, 0, 999, {}, {}, 1000.0});
    CHECK(v[0] == 1.0);
    CHECK(v[1] == doctest::Approx((0.2 * 850 + 2.0 * 100 + 3.0 * 50) / 1000.0));
    CHECK(v[2] == 3.0);
    CHECK(v[4] == doctest::Approx(0.6));
    CHECK(v[5] == 2.0);
  }
  SUBCASE("ECG phases") {
    std::vector<double> sig(3000, 0.0);
    const std::vector<std::size_t> peaks = {0, 1000, 2000};
    auto at = [&](std::size_t end) { return *extract_features(FeatureKind::ecg, {sig, 0, end, peaks, {}, 1000.0}); };
    auto v = at(2100);  // 0.1 RR after a beat: ventricular, 25% complete
    CHECK(v[12] == 1.0);
    CHECK(v[13] == doctest::Approx(0.25));
    CHECK(v[10] == 0.0);
    v = at(2900);  // 0.9 RR: atrial, 50% complete
    CHECK(v[10] == 1.0);
    CHECK(v[11] == doctest::Approx(0.5));
    CHECK(v[12] == 0.0);
  }
  CHECK(code_of([] { parse_feature_kind("skt"); }) == Errc::unknown_kind);
}

TEST_CASE("schema: Table I widths and context block") {
  CHECK(feature_names(FeatureKind::bvp).size() == 10);
  CHECK(feature_names(FeatureKind::ecg).size() == 15);
  CHECK(feature_names(FeatureKind::rsp).size() == 20);
  CHECK(feature_names(FeatureKind::eda).size() == 6);
  CHECK(feature_names(FeatureKind::emg).size() == 6);
  CHECK(kTableWidth == 69);

  const auto rec = synthetic_recording(50.0);
  const auto t = grid(0.0, 49.95);
  REQUIRE(t.size() == 1000);
  const auto start = std::chrono::steady_clock::now();
  const auto m = build_feature_frames(rec, t);
  MESSAGE("50 s recording: ", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), " s");
  CHECK(m.rows() == 1000);
  CHECK(m.cols() == 149);
  CHECK(m.data.size() == 149 * 1000);
  std::size_t table = 0, ctx = 0;
  for (const auto& n : m.column_names) (n.rfind("ctx_", 0) == 0 ? ctx : table)++;
  CHECK(table == 69);
  CHECK(ctx == 80);
  CHECK(m.column_names[0] == "bvp_rate_baseline");
  CHECK(m.column_names[69] == "ctx_ecg_m250ms");
  CHECK(m.column_names[148] == "ctx_emg_trap_p200ms");
  for (double v : m.data) REQUIRE(std::isfinite(v));

  // Mean heart rate near the synthetic 70 + 6 bpm late in the recording.
  CHECK(m.at(900, col(m, "ecg_rate_mean")) == doctest::Approx(76.0).epsilon(0.05));
  CHECK(m.at(900, col(m, "bvp_rate_mean")) == doctest::Approx(76.0).epsilon(0.05));
  CHECK(m.at(900, col(m, "rsp_rate_mean")) == doctest::Approx(17.0).epsilon(0.2));
  CHECK(m.at(900, col(m, "ecg_quality_mean")) > 0.9);

  WindowConfig wide;
  wide.raw_context_halfwidth_s = 0.5;
  wide.raw_context_rate_hz = 10.0;
  CHECK(build_feature_frames(rec, std::vector<double>(t.begin(), t.begin() + 20), wide).cols() == 69 + 8 * 10);
  wide.raw_context_rate_hz = 40.0;
  CHECK(wide.context_width() == 8 * 40);
}

TEST_CASE("zero-signal recording") {
  const auto rec = flat_recording(30000);
  const auto m = build_feature_frames(rec, grid(0.0, 29.95));
  for (double v : m.data) REQUIRE(v == 0.0);
}

TEST_CASE("determinism and translation consistency") {
  const auto rec = synthetic_recording(30.0, 7.0, 3.0, 5);
  const auto t = grid(0.0, 20.0);
  const auto a = build_feature_frames(rec, t);
  const auto b = build_feature_frames(rec, t);
  CHECK(a.data == b.data);

  auto longer = rec;
  auto extra = synthetic_recording(10.0, 3.0, 8.0, 99);
  for (std::size_t c = 0; c < corpus::kChannelCount; ++c)
    longer.channels[c].insert(longer.channels[c].end(), extra.channels[c].begin(), extra.channels[c].end());
  const auto c = build_feature_frames(longer, t);
  CHECK(c.data == a.data);
}

TEST_CASE("imputation of undefined rate features") {
  // ECG spikes at 1 Hz from 12 s to 20 s, then silence until 40 s.
  auto rec = flat_recording(40000);
  auto& ecg = rec.channel(Channel::ecg);
  for (std::size_t p = 12000; p <= 20000; p += 1000) add_spike(ecg, p);
  const auto t = grid(0.0, 39.0);
  const auto m = build_feature_frames(rec, t);
  const auto mean_col = col(m, "ecg_rate_mean");
  // Peak-free prefix: nothing to carry, imputed as 0.
  for (std::size_t r = 0; t[r] < 12.9; ++r) REQUIRE(m.at(r, mean_col) == 0.0);
  // Defined while at least two beats sit in the 10 s window.
  const auto row_at = [&](double s) { return static_cast<std::size_t>(std::llround(s / 0.05)); };
  CHECK(m.at(row_at(15.0), mean_col) == doctest::Approx(60.0).epsilon(0.01));
  // After the beats leave the window the last defined row is carried forward.
  const auto last_defined = row_at(29.0);
  for (std::size_t r = last_defined + 1; r < m.rows(); ++r)
    for (std::size_t c = 0; c < 10 + 15; ++c) REQUIRE(m.at(r, c) == m.at(last_defined, c));
  for (double v : m.data) REQUIRE(std::isfinite(v));
}

TEST_CASE("shift_features") {
  auto rec = synthetic_recording(20.0);
  const double slope = 0.002;  // per sample
  auto& skt = rec.channel(Channel::skt);
  for (std::size_t i = 0; i < skt.size(); ++i) skt[i] = slope * static_cast<double>(i);
  const auto t = grid(2.0, 18.0);
  const auto base = build_feature_frames(rec, t);
  CHECK(shift_features(base, 0.0).data == base.data);

  const auto shifted = shift_features(base, 0.05);
  REQUIRE(shifted.rows() == base.rows());
  for (std::size_t r = 0; r < base.rows(); ++r)
    for (std::size_t j = 0; j < 10; ++j) {
      const auto c = col(base, "ctx_skt_m250ms") + j;
      REQUIRE(base.at(r, c) - shifted.at(r, c) == doctest::Approx(50 * slope).epsilon(1e-9));
    }
  CHECK(shift_features(base, 0.005).data != base.data);
  CHECK(code_of([&] { shift_features(base, 0.06); }) == Errc::delay_out_of_range);
  CHECK(code_of([&] { shift_features(base, -0.001); }) == Errc::delay_out_of_range);
}

TEST_CASE("timestamp and config validation") {
  const auto rec = flat_recording(5000);
  const std::vector<double> bad = {1.0, 6.0};
  CHECK(code_of([&] { build_feature_frames(rec, bad); }) == Errc::timestamp_out_of_range);
  WindowConfig cfg;
  cfg.emg_s = 5.0;
  const std::vector<double> ok = {1.0};
  CHECK(code_of([&] { build_feature_frames(rec, ok, cfg); }) == Errc::invalid_argument);
}

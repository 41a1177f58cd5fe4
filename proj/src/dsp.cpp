#include "affectfuse/dsp.hpp"

#include "affectfuse/error.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace affectfuse::dsp {

namespace {

long double section_dc_gain(const Biquad& q) {
  const long double num = static_cast<long double>(q.b[0]) + q.b[1] + q.b[2];
  const long double den = 1.0L + q.a[0] + q.a[1];
  return num / den;
}

using cplx = std::complex<double>;

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

void check_rate(double fs) {
  if (!(fs > 0.0)) throw Error(Errc::invalid_argument, fmt::format("sample rate must be positive, got {}", fs));
}

void check_cutoffs(const FilterSpec& spec, double fs) {
  const double nyq = fs / 2.0;
  auto inside = [nyq](double f) { return f > 0.0 && f < nyq; };
  if (spec.order < 1) throw Error(Errc::invalid_cutoff, fmt::format("filter order must be >= 1, got {}", spec.order));
  const bool two = spec.kind == FilterKind::bandpass || spec.kind == FilterKind::bandstop;
  if (!inside(spec.low_hz) || (two && !inside(spec.high_hz)))
    throw Error(Errc::invalid_cutoff,
                fmt::format("cutoff(s) {} / {} Hz not inside (0, {}) Hz", spec.low_hz, spec.high_hz, nyq));
  if (two && !(spec.low_hz < spec.high_hz))
    throw Error(Errc::invalid_cutoff, fmt::format("low cutoff {} Hz must be below high cutoff {} Hz",
                                                  spec.low_hz, spec.high_hz));
}

// Analog Butterworth prototype with unit cutoff.
std::vector<cplx> prototype_poles(int order) {
  std::vector<cplx> poles;
  for (int m = -order + 1; m < order; m += 2) {
    poles.push_back(-std::exp(cplx(0.0, std::numbers::pi * m / (2.0 * order))));
  }
  return poles;
}

cplx prod_neg(const std::vector<cplx>& v) {
  cplx p = 1.0;
  for (auto x : v) p *= -x;
  return p;
}

Zpk analog_design(const FilterSpec& spec, double fs) {
  auto warp = [fs](double f) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); };
  const auto proto = prototype_poles(spec.order);
  const int n = spec.order;
  Zpk out;
  switch (spec.kind) {
    case FilterKind::lowpass: {
      const double w = warp(spec.low_hz);
      for (auto p : proto) out.poles.push_back(p * w);
      out.gain = std::pow(w, n);
      break;
    }
    case FilterKind::highpass: {
      const double w = warp(spec.low_hz);
      for (auto p : proto) out.poles.push_back(w / p);
      out.zeros.assign(n, cplx(0.0, 0.0));
      out.gain = (1.0 / prod_neg(proto)).real();
      break;
    }
    case FilterKind::bandpass: {
      const double w1 = warp(spec.low_hz), w2 = warp(spec.high_hz);
      const double bw = w2 - w1, w0 = std::sqrt(w1 * w2);
      for (auto p : proto) {
        const cplx half = p * bw / 2.0;
        const cplx root = std::sqrt(half * half - w0 * w0);
        out.poles.push_back(half + root);
        out.poles.push_back(half - root);
      }
      out.zeros.assign(n, cplx(0.0, 0.0));
      out.gain = std::pow(bw, n);
      break;
    }
    case FilterKind::bandstop: {
      const double w1 = warp(spec.low_hz), w2 = warp(spec.high_hz);
      const double bw = w2 - w1, w0 = std::sqrt(w1 * w2);
      for (auto p : proto) {
        const cplx half = (bw / 2.0) / p;
        const cplx root = std::sqrt(half * half - w0 * w0);
        out.poles.push_back(half + root);
        out.poles.push_back(half - root);
      }
      for (int i = 0; i < n; ++i) {
        out.zeros.emplace_back(0.0, w0);
        out.zeros.emplace_back(0.0, -w0);
      }
      out.gain = (1.0 / prod_neg(proto)).real();
      break;
    }
  }
  return out;
}

Zpk bilinear(const Zpk& analog, double fs) {
  const double k2 = 2.0 * fs;
  Zpk d;
  cplx num = 1.0, den = 1.0;
  for (auto z : analog.zeros) {
    d.zeros.push_back((k2 + z) / (k2 - z));
    num *= (k2 - z);
  }
  for (auto p : analog.poles) {
    d.poles.push_back((k2 + p) / (k2 - p));
    den *= (k2 - p);
  }
  while (d.zeros.size() < d.poles.size()) d.zeros.emplace_back(-1.0, 0.0);
  d.gain = analog.gain * (num / den).real();
  return d;
}

constexpr double kImagTol = 1e-12;

// Splits roots into conjugate pairs (one representative with imag > 0) and reals.
void split_roots(const std::vector<cplx>& roots, std::vector<cplx>& complex_upper, std::vector<double>& reals) {
  for (auto r : roots) {
    if (std::abs(r.imag()) <= kImagTol * std::max(1.0, std::abs(r))) {
      reals.push_back(r.real());
    } else if (r.imag() > 0) {
      complex_upper.push_back(r);
    }
  }
}

std::vector<Biquad> zpk_to_sos(const Zpk& d) {
  std::vector<cplx> pc, zc;
  std::vector<double> pr, zr;
  split_roots(d.poles, pc, pr);
  split_roots(d.zeros, zc, zr);

  // Pole groups: conjugate pairs, then real poles two at a time.
  struct PoleGroup {
    std::vector<cplx> roots;
    double radius;
  };
  std::vector<PoleGroup> groups;
  for (auto p : pc) groups.push_back({{p, std::conj(p)}, std::abs(p)});
  std::sort(pr.begin(), pr.end());
  for (std::size_t i = 0; i < pr.size(); i += 2) {
    PoleGroup g;
    g.roots.emplace_back(pr[i], 0.0);
    if (i + 1 < pr.size()) g.roots.emplace_back(pr[i + 1], 0.0);
    g.radius = 0.0;
    for (auto r : g.roots) g.radius = std::max(g.radius, std::abs(r));
    groups.push_back(std::move(g));
  }
  // Poles closest to the unit circle go last in the cascade.
  std::stable_sort(groups.begin(), groups.end(),
                   [](const PoleGroup& a, const PoleGroup& b) { return a.radius < b.radius; });

  std::vector<bool> zc_used(zc.size(), false), zr_used(zr.size(), false);
  std::vector<Biquad> sos;
  for (const auto& g : groups) {
    const cplx anchor = g.roots.front();
    std::vector<cplx> zeros;
    // Prefer the nearest unused conjugate zero pair, else the nearest reals.
    int best = -1;
    double best_d = 0.0;
    for (std::size_t i = 0; i < zc.size(); ++i) {
      if (zc_used[i]) continue;
      const double dist = std::abs(zc[i] - anchor);
      if (best < 0 || dist < best_d) {
        best = static_cast<int>(i);
        best_d = dist;
      }
    }
    if (best >= 0 && g.roots.size() == 2) {
      zc_used[best] = true;
      zeros = {zc[best], std::conj(zc[best])};
    } else {
      for (std::size_t k = 0; k < g.roots.size(); ++k) {
        int bi = -1;
        double bd = 0.0;
        for (std::size_t i = 0; i < zr.size(); ++i) {
          if (zr_used[i]) continue;
          const double dist = std::abs(cplx(zr[i], 0.0) - anchor);
          if (bi < 0 || dist < bd) {
            bi = static_cast<int>(i);
            bd = dist;
          }
        }
        if (bi >= 0) {
          zr_used[bi] = true;
          zeros.emplace_back(zr[bi], 0.0);
        }
      }
    }
    Biquad q;
    auto poly = [](const std::vector<cplx>& roots, std::array<double, 3>& c) {
      c = {1.0, 0.0, 0.0};
      if (roots.size() == 1) {
        c = {1.0, -roots[0].real(), 0.0};
      } else if (roots.size() == 2) {
        c = {1.0, -(roots[0] + roots[1]).real(), (roots[0] * roots[1]).real()};
      }
    };
    poly(zeros, q.b);
    std::array<double, 3> a{};
    poly(g.roots, a);
    q.a = {a[1], a[2]};
    sos.push_back(q);
  }
  for (auto& c : sos.front().b) c *= d.gain;
  return sos;
}

void sosfilt_inplace(const std::vector<Biquad>& sos, std::vector<double>& x,
                     const std::vector<std::array<double, 2>>& zi, double zi_scale) {
  for (std::size_t s = 0; s < sos.size(); ++s) {
    const auto& q = sos[s];
    double z0 = zi[s][0] * zi_scale, z1 = zi[s][1] * zi_scale;
    for (double& v : x) {
      const double in = v;
      const double y = q.b[0] * in + z0;
      z0 = q.b[1] * in - q.a[0] * y + z1;
      z1 = q.b[2] * in - q.a[1] * y;
      v = y;
    }
  }
}

// Steady-state section states for a unit step at the cascade input.
std::vector<std::array<double, 2>> sos_steady_state(const std::vector<Biquad>& sos) {
  std::vector<std::array<double, 2>> zi;
  double scale = 1.0;
  for (const auto& q : sos) {
    const auto gain = static_cast<double>(section_dc_gain(q));
    const double z1 = q.b[2] - q.a[1] * gain;
    const double z0 = q.b[1] - q.a[0] * gain + z1;
    zi.push_back({z0 * scale, z1 * scale});
    scale *= gain;
  }
  return zi;
}

std::size_t mirror_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n) - 2;
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

std::vector<Biquad> butterworth_sos(const FilterSpec& spec, double sample_rate) {
  check_rate(sample_rate);
  check_cutoffs(spec, sample_rate);
  auto sos = zpk_to_sos(bilinear(analog_design(spec, sample_rate), sample_rate));
  // DC-passing designs: give every section unit DC gain. With very low
  // cutoffs a single gain on the first section leaves ~1e-8 DC errors.
  if (spec.kind == FilterKind::lowpass || spec.kind == FilterKind::bandstop) {
    for (auto& q : sos) {
      const long double dc = section_dc_gain(q);
      if (dc != 0.0L && std::isfinite(static_cast<double>(dc)))
        for (auto& c : q.b) c = static_cast<double>(c / dc);
    }
  }
  return sos;
}

std::size_t filtfilt_padding(std::size_t sections) noexcept { return 3 * (2 * sections + 1); }

Signal iir_filter(const Signal& signal, const FilterSpec& spec) {
  const auto sos = butterworth_sos(spec, signal.sample_rate);
  const std::size_t n = signal.size();
  const std::size_t pad = filtfilt_padding(sos.size());
  if (n <= pad)
    throw Error(Errc::signal_too_short,
                fmt::format("signal of {} samples too short for padding of {} samples", n, pad));

  const auto& x = signal.samples;
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const auto zi = sos_steady_state(sos);
  sosfilt_inplace(sos, ext, zi, ext.front());
  std::reverse(ext.begin(), ext.end());
  sosfilt_inplace(sos, ext, zi, ext.front());
  std::reverse(ext.begin(), ext.end());

  Signal out{std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                                 ext.begin() + static_cast<std::ptrdiff_t>(pad + n)),
             signal.sample_rate};
  return out;
}

Signal notch_filter(const Signal& signal, double f0_hz, double width_hz) {
  if (!(width_hz > 0.0)) throw Error(Errc::invalid_cutoff, fmt::format("notch width must be positive, got {}", width_hz));
  return iir_filter(signal, FilterSpec::bandstop(f0_hz - width_hz / 2.0, f0_hz + width_hz / 2.0, 2));
}

Signal detrend(const Signal& signal) {
  const std::size_t n = signal.size();
  Signal out{std::vector<double>(n, 0.0), signal.sample_rate};
  if (n < 2) return out;
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  double mean = 0.0;
  for (double v : signal.samples) mean += v;
  mean /= static_cast<double>(n);
  double sty = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) - centre;
    sty += t * (signal.samples[i] - mean);
    stt += t * t;
  }
  const double slope = sty / stt;
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = signal.samples[i] - mean - slope * (static_cast<double>(i) - centre);
  }
  return out;
}

Signal zscore(const Signal& signal) {
  const std::size_t n = signal.size();
  Signal out{std::vector<double>(n, 0.0), signal.sample_rate};
  if (n == 0) return out;
  const auto [lo, hi] = std::minmax_element(signal.samples.begin(), signal.samples.end());
  if (*lo == *hi) return out;
  double mean = 0.0;
  for (double v : signal.samples) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : signal.samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd == 0.0) return out;
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = (signal.samples[i] - mean) / sd;
  return out;
}

Signal rms_envelope(const Signal& signal, double window_s) {
  check_rate(signal.sample_rate);
  const auto w = static_cast<long long>(std::llround(window_s * signal.sample_rate));
  if (w < 1) throw Error(Errc::window_too_small, fmt::format("RMS window of {} s is below one sample", window_s));
  const auto n = static_cast<long long>(signal.size());
  std::vector<long double> prefix(static_cast<std::size_t>(n) + 1, 0.0L);
  for (long long i = 0; i < n; ++i) {
    const long double v = signal.samples[static_cast<std::size_t>(i)];
    prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + v * v;
  }
  const long long left = (w - 1) / 2, right = w - 1 - left;
  Signal out{std::vector<double>(static_cast<std::size_t>(n)), signal.sample_rate};
  for (long long i = 0; i < n; ++i) {
    const long long a = std::max(0LL, i - left), b = std::min(n - 1, i + right);
    const long double ms = (prefix[static_cast<std::size_t>(b) + 1] - prefix[static_cast<std::size_t>(a)]) /
                           static_cast<long double>(b - a + 1);
    out.samples[static_cast<std::size_t>(i)] = static_cast<double>(std::sqrt(std::max(0.0L, ms)));
  }
  return out;
}

std::vector<double> savgol_coefficients(int half_window, int order) {
  const int w = 2 * half_window + 1;
  if (order < 0 || w <= order)
    throw Error(Errc::invalid_window, fmt::format("Savitzky-Golay window {} must exceed order {}", w, order));
  // Polynomial basis on u in [-1, 1]; the centre value is the intercept.
  Eigen::MatrixXd basis(w, order + 1);
  const double scale = half_window > 0 ? static_cast<double>(half_window) : 1.0;
  for (int i = 0; i < w; ++i) {
    const double u = (i - half_window) / scale;
    double p = 1.0;
    for (int j = 0; j <= order; ++j) {
      basis(i, j) = p;
      p *= u;
    }
  }
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(order + 1);
  e0(0) = 1.0;
  const Eigen::VectorXd row = gram.ldlt().solve(e0);
  const Eigen::VectorXd coeffs = basis * row;
  return {coeffs.data(), coeffs.data() + coeffs.size()};
}

Signal savgol_smooth(const Signal& signal, int order, double length_s) {
  check_rate(signal.sample_rate);
  auto w = static_cast<long long>(std::llround(length_s * signal.sample_rate));
  if (w % 2 == 0) ++w;
  if (w <= order || w < 1)
    throw Error(Errc::invalid_window, fmt::format("Savitzky-Golay window of {} samples must be odd and exceed order {}", w, order));
  const int half = static_cast<int>(w / 2);
  const auto h = savgol_coefficients(half, order);
  const std::size_t n = signal.size();
  Signal out{std::vector<double>(n, 0.0), signal.sample_rate};
  const auto& x = signal.samples;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const long long centre = static_cast<long long>(i);
    if (centre - half >= 0 && centre + half < static_cast<long long>(n)) {
      const double* base = x.data() + (centre - half);
      for (long long k = 0; k < w; ++k) acc += h[static_cast<std::size_t>(k)] * base[k];
    } else {
      for (long long k = 0; k < w; ++k) acc += h[static_cast<std::size_t>(k)] * x[mirror_index(centre - half + k, n)];
    }
    out.samples[i] = acc;
  }
  return out;
}

std::vector<double> moving_average(std::span<const double> series, int n) {
  if (n < 1) throw Error(Errc::invalid_argument, fmt::format("moving average window must be >= 1, got {}", n));
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t start = i + 1 >= static_cast<std::size_t>(n) ? i + 1 - static_cast<std::size_t>(n) : 0;
    double acc = 0.0;
    for (std::size_t k = start; k <= i; ++k) acc += series[k];
    out[i] = acc / static_cast<double>(i - start + 1);
  }
  return out;
}

std::vector<std::size_t> detect_peaks(std::span<const double> x, std::size_t min_distance, double min_prominence) {
  const std::size_t n = x.size();
  std::vector<std::size_t> peaks;
  if (n < 3) return peaks;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double range = *hi - *lo;
  if (range == 0.0) return peaks;

  // Local maxima; flat tops resolve to their middle sample.
  for (std::size_t i = 1; i + 1 < n;) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back((i + ahead - 1) / 2);
        i = ahead;
        continue;
      }
      i = ahead;
      continue;
    }
    ++i;
  }
  if (peaks.empty()) return peaks;

  // Prominence: base on each side is the minimum up to the nearest strictly
  // higher sample (or the edge). Nearest-higher via monotonic stacks, range
  // minima via a sparse table.
  std::vector<long long> prev_higher(n, -1), next_higher(n, static_cast<long long>(n));
  {
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
      while (!stack.empty() && x[stack.back()] <= x[i]) stack.pop_back();
      prev_higher[i] = stack.empty() ? -1 : static_cast<long long>(stack.back());
      stack.push_back(i);
    }
    stack.clear();
    for (std::size_t i = n; i-- > 0;) {
      while (!stack.empty() && x[stack.back()] <= x[i]) stack.pop_back();
      next_higher[i] = stack.empty() ? static_cast<long long>(n) : static_cast<long long>(stack.back());
      stack.push_back(i);
    }
  }
  std::size_t levels = 1;
  while ((std::size_t{1} << levels) <= n) ++levels;
  std::vector<std::vector<double>> table(levels);
  table[0].assign(x.begin(), x.end());
  for (std::size_t l = 1; l < levels; ++l) {
    const std::size_t span_len = std::size_t{1} << l;
    table[l].resize(n - span_len + 1);
    for (std::size_t i = 0; i + span_len <= n; ++i)
      table[l][i] = std::min(table[l - 1][i], table[l - 1][i + span_len / 2]);
  }
  auto range_min = [&](std::size_t a, std::size_t b) {  // inclusive
    std::size_t l = 0;
    while ((std::size_t{2} << l) <= b - a + 1) ++l;
    return std::min(table[l][a], table[l][b + 1 - (std::size_t{1} << l)]);
  };

  const double threshold = min_prominence * range;
  std::vector<std::size_t> kept;
  std::vector<double> prominence;
  for (auto p : peaks) {
    const std::size_t left = static_cast<std::size_t>(prev_higher[p] + 1);
    const std::size_t right = static_cast<std::size_t>(next_higher[p] - 1);
    const double base = std::max(range_min(left, p), range_min(p, right));
    const double prom = x[p] - base;
    if (prom >= threshold) {
      kept.push_back(p);
      prominence.push_back(prom);
    }
  }
  if (min_distance <= 1 || kept.size() < 2) return kept;

  std::vector<std::size_t> order(kept.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return prominence[a] > prominence[b]; });
  std::vector<bool> removed(kept.size(), false);
  for (auto k : order) {
    if (removed[k]) continue;
    for (std::size_t j = k; j-- > 0 && kept[k] - kept[j] < min_distance;) removed[j] = true;
    for (std::size_t j = k + 1; j < kept.size() && kept[j] - kept[k] < min_distance; ++j) removed[j] = true;
  }
  std::vector<std::size_t> result;
  for (std::size_t k = 0; k < kept.size(); ++k)
    if (!removed[k]) result.push_back(kept[k]);
  return result;
}

std::vector<std::size_t> detect_peaks(const Signal& signal, double min_distance_s, double min_prominence) {
  check_rate(signal.sample_rate);
  if (!(min_distance_s > 0.0))
    throw Error(Errc::invalid_argument, fmt::format("min_distance must be positive, got {}", min_distance_s));
  const auto distance = std::max<long long>(1, std::llround(min_distance_s * signal.sample_rate));
  return detect_peaks(signal.samples, static_cast<std::size_t>(distance), min_prominence);
}

Trend fit_trend(std::span<const double> y, double sample_rate) {
  check_rate(sample_rate);
  const std::size_t n = y.size();
  if (n < 3) throw Error(Errc::too_short, fmt::format("trend fit needs >= 3 samples, got {}", n));
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  const double half = centre;
  double s[5] = {0, 0, 0, 0, 0};
  double sy[3] = {0, 0, 0};
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) - centre) / half;
    const double u2 = u * u;
    s[0] += 1.0;
    s[1] += u;
    s[2] += u2;
    s[3] += u2 * u;
    s[4] += u2 * u2;
    sy[0] += y[i];
    sy[1] += u * y[i];
    sy[2] += u2 * y[i];
    mean += y[i];
  }
  mean /= static_cast<double>(n);
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);
  Trend t;
  if (sst <= 1e-24 * static_cast<double>(n) * std::max(1.0, mean * mean)) return t;

  Eigen::Matrix3d gram;
  gram << s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4];
  const Eigen::Vector3d rhs(sy[0], sy[1], sy[2]);
  const Eigen::Vector3d p = gram.ldlt().solve(rhs);

  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) - centre) / half;
    const double r = y[i] - (p(0) + p(1) * u + p(2) * u * u);
    ssr += r * r;
  }
  // u = alpha * t + beta with t in seconds.
  const double alpha = sample_rate / half, beta = -centre / half;
  t.linear = p(1) * alpha + 2.0 * p(2) * alpha * beta;
  t.quadratic = p(2) * alpha * alpha;
  t.r2 = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
  return t;
}

}  // namespace affectfuse::dsp

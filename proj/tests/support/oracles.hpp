#pragma once

// Brute-force reference implementations shared by the unit and acceptance
// suites. Written without calling the code they check.

#include "affectfuse/corpus.hpp"
#include "fixtures.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <vector>

namespace oracles {

using affectfuse::corpus::AnnotationTrack;

// Independent oracle: per-video means from raw samples, the member farthest
// from (5, 5) leads each group (lower id on ties), then the best of all 24
// group->quadrant assignments by plain nested loops. Quadrant indices follow
// the order HVHA, LVHA, LVLA, HVLA; the first maximum in lexicographic order wins.
inline std::vector<int> oracle_assignment(const std::vector<AnnotationTrack>& tracks, const std::vector<std::vector<int>>& groups) {
  std::map<int, std::pair<double, double>> sums;
  std::map<int, double> counts;
  for (const auto& t : tracks)
    for (std::size_t i = 0; i < t.valence.size(); ++i) {
      sums[t.video_id].first += t.valence[i];
      sums[t.video_id].second += t.arousal[i];
      counts[t.video_id] += 1.0;
    }
  const double sv[4] = {1, -1, -1, 1}, sa[4] = {1, 1, -1, -1};
  std::vector<std::pair<double, double>> lead;
  for (const auto& g : groups) {
    double best = -1.0;
    int best_id = 0;
    std::pair<double, double> best_m;
    for (int v : g) {
      const double mv = sums[v].first / counts[v] - 5.0, ma = sums[v].second / counts[v] - 5.0;
      const double d = std::sqrt(mv * mv + ma * ma);
      if (d > best || (d == best && v < best_id)) {
        best = d;
        best_id = v;
        best_m = {mv, ma};
      }
    }
    lead.push_back(best_m);
  }
  double best_score = -1e300;
  std::vector<int> best;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          const int q[4] = {a, b, c, d};
          if (std::set<int>(q, q + 4).size() != 4) continue;
          double score = 0.0;
          for (int g = 0; g < 4; ++g) score += sv[q[g]] * lead[g].first + sa[q[g]] * lead[g].second;
          if (score > best_score) {
            best_score = score;
            best.assign(q, q + 4);
          }
        }
  return best;
}

// Independent greedy ensemble selection (plain doubles, explicit loops).
inline std::vector<int> greedy_oracle(const std::vector<std::vector<double>>& P, const std::vector<double>& y, int iters) {
  auto rmse = [&](const std::vector<double>& p) { return fixtures::brute_rmse(p, y); };
  const std::size_t M = P.size(), n = y.size();
  std::size_t first = 0;
  for (std::size_t m = 1; m < M; ++m)
    if (rmse(P[m]) < rmse(P[first])) first = m;
  std::vector<int> counts(M, 0), best;
  counts[first] = 1;
  double best_r = rmse(P[first]);
  best = counts;
  for (int it = 0; it < iters; ++it) {
    const int total = std::accumulate(counts.begin(), counts.end(), 0) + 1;
    std::size_t pick = 0;
    double pick_r = 1e300;
    for (std::size_t m = 0; m < M; ++m) {
      std::vector<double> e(n, 0.0);
      for (std::size_t j = 0; j < M; ++j)
        for (std::size_t i = 0; i < n; ++i) e[i] += (counts[j] + (j == m ? 1 : 0)) * P[j][i];
      for (auto& v : e) v /= total;
      const double r = rmse(e);
      if (r < pick_r - 1e-12) {
        pick_r = r;
        pick = m;
      }
    }
    ++counts[pick];
    if (pick_r < best_r - 1e-12) {
      best_r = pick_r;
      best = counts;
    }
  }
  return best;
}

}  // namespace oracles

/*
 * Copyright 2026 gbl contributors
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "gbl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gbl::stats {

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty input");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: size mismatch");
  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult res;
  res.n_nonzero = static_cast<int>(diffs.size());
  if (diffs.empty()) return res;  // no evidence either way

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });

  // Average ranks for tied magnitudes; collect tie group sizes.
  std::vector<double> rank(n);
  std::vector<std::size_t> tie_sizes;
  bool has_ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    if (j > i) {
      has_ties = true;
      tie_sizes.push_back(j - i + 1);
    }
    i = j + 1;
  }

  for (std::size_t i = 0; i < n; ++i) (diffs[i] > 0 ? res.w_plus : res.w_minus) += rank[i];

  if (n <= 25 && !has_ties) {
    // Exact null distribution of W+ over all 2^n sign assignments via DP on
    // integer rank sums.
    const int max_w = static_cast<int>(n * (n + 1) / 2);
    std::vector<double> count(static_cast<std::size_t>(max_w) + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r)
      for (int w = max_w; w >= static_cast<int>(r); --w)
        count[static_cast<std::size_t>(w)] += count[static_cast<std::size_t>(w - static_cast<int>(r))];
    const double total = std::pow(2.0, static_cast<double>(n));
    const int w_obs = static_cast<int>(std::lround(std::min(res.w_plus, res.w_minus)));
    double tail = 0.0;
    for (int w = 0; w <= w_obs; ++w) tail += count[static_cast<std::size_t>(w)];
    res.p_value = std::min(1.0, 2.0 * tail / total);
    res.exact = true;
  } else {
    const double dn = static_cast<double>(n);
    double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
    for (std::size_t t : tie_sizes) {
      double td = static_cast<double>(t);
      var -= td * (td * td - 1.0) / 48.0;
    }
    if (var <= 0.0) {
      res.p_value = 1.0;
      return res;
    }
    const double mu = dn * (dn + 1.0) / 4.0;
    const double z = (res.w_plus - mu) / std::sqrt(var);
    res.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::abs(z))));
  }
  return res;
}

}  // namespace gbl::stats

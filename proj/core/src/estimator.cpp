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
#include "gbl/estimator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace gbl::estimator {

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    double t = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= t) ++i;
    while (j < sb.size() && sb[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

void BetaGrid::validate() const {
  if (!(lo > 0.0 && lo <= hi && step > 0.0)) throw std::invalid_argument("BetaGrid: need 0 < lo <= hi, step > 0");
}

std::vector<double> BetaGrid::points() const {
  validate();
  std::vector<double> pts;
  for (int i = 0;; ++i) {
    double p = lo + i * step;
    if (p > hi + step * 1e-9) break;
    pts.push_back(std::min(p, hi));
  }
  if (pts.empty() || std::abs(pts.back() - hi) > step * 1e-9) pts.push_back(hi);
  return pts;
}

namespace {

// KS between {a/beta : a in sorted_a} and sorted_b without materializing the
// rescaled sample; division by a positive constant preserves sort order.
double ks_scaled(const std::vector<double>& sorted_a, double beta, const std::vector<double>& sorted_b) {
  const double na = static_cast<double>(sorted_a.size());
  const double nb = static_cast<double>(sorted_b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sorted_a.size() && j < sorted_b.size()) {
    double va = sorted_a[i] / beta;
    double t = std::min(va, sorted_b[j]);
    while (i < sorted_a.size() && sorted_a[i] / beta <= t) ++i;
    while (j < sorted_b.size() && sorted_b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace

PropensityEstimate estimate_beta(const ScorePool& pool, const BetaGrid& grid) {
  if (pool.affected.empty() || pool.nonaffected.empty())
    throw std::invalid_argument("estimate_beta: both groups must be non-empty in cluster '" +
                                pool.cluster + "'");
  std::vector<double> sa = pool.affected;
  std::vector<double> sb = pool.nonaffected;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  PropensityEstimate est;
  est.grid = grid;
  est.cluster = pool.cluster;
  est.n_affected = sa.size();
  est.n_nonaffected = sb.size();

  const std::vector<double> pts = grid.points();
  double best_ks = std::numeric_limits<double>::infinity();
  double best_beta = pts.back();
  // Descending scan with strict improvement keeps the largest minimizer.
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    double ks = ks_scaled(sa, *it, sb);
    if (ks < best_ks) {
      best_ks = ks;
      best_beta = *it;
    }
  }
  est.beta_hat = best_beta;
  est.ks_at_min = best_ks;
  return est;
}

PoolBuildResult build_pools(const GroupedDataset& ds, const AttractivenessTable& table,
                            const Clustering& clustering) {
  if (table.queries.size() != ds.queries.size())
    throw std::invalid_argument("build_pools: table/dataset size mismatch");
  std::map<std::string, ScorePool> by_cluster;
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& q = ds.queries[qi];
    const auto& qa = table.queries[qi];
    auto cit = clustering.find(q.id);
    if (cit == clustering.end())
      throw std::invalid_argument("build_pools: query '" + q.id + "' has no cluster assignment");
    auto& pool = by_cluster[cit->second];
    pool.cluster = cit->second;
    pool.source_queries.push_back(q.id);
    for (std::size_t i = 0; i < q.items.size(); ++i) {
      if (q.items[i].group == Group::Affected)
        pool.affected.push_back(qa.values[i]);
      else if (q.items[i].group == Group::NonAffected)
        pool.nonaffected.push_back(qa.values[i]);
      else
        throw std::invalid_argument("build_pools: unassigned group in query '" + q.id + "'");
    }
  }
  PoolBuildResult res;
  for (auto& [cid, pool] : by_cluster) {
    if (pool.affected.empty() || pool.nonaffected.empty())
      res.skipped_clusters.push_back(cid);
    else
      res.pools.push_back(std::move(pool));
  }
  return res;
}

EstimateSet estimate_all(const std::vector<ScorePool>& pools, const BetaGrid& grid) {
  if (pools.empty()) throw std::invalid_argument("estimate_all: no pools");
  EstimateSet set;
  for (const auto& pool : pools) {
    try {
      set.by_cluster.emplace(pool.cluster, estimate_beta(pool, grid));
    } catch (const std::exception&) {
      set.failed_clusters.push_back(pool.cluster);
    }
  }
  return set;
}

void write_estimates_csv(const EstimateSet& estimates, std::ostream& out) {
  auto fmt = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  out << "cluster_id,beta_hat,ks_at_min,n_affected,n_nonaffected\n";
  for (const auto& [cid, est] : estimates.by_cluster)
    out << cid << ',' << fmt(est.beta_hat) << ',' << fmt(est.ks_at_min) << ',' << est.n_affected
        << ',' << est.n_nonaffected << '\n';
}

}  // namespace gbl::estimator

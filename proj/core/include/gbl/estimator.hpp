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
#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gbl/biassim.hpp"
#include "gbl/dataset.hpp"

namespace gbl::estimator {

/// Exact two-sample Kolmogorov-Smirnov statistic:
/// sup_t |ECDF_a(t) - ECDF_b(t)| via a merged sweep. Throws on empty samples.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct BetaGrid {
  double lo = 0.05;
  double hi = 1.0;
  double step = 0.005;

  std::vector<double> points() const;  // ascending, lo and hi included
  void validate() const;
};

/// Attractiveness scores pooled over one cluster of queries, split by group.
struct ScorePool {
  std::vector<double> affected;     // A_a
  std::vector<double> nonaffected;  // A_n
  std::vector<std::string> source_queries;
  std::string cluster;
};

struct PropensityEstimate {
  double beta_hat = 1.0;
  double ks_at_min = 0.0;
  BetaGrid grid;
  std::size_t n_affected = 0;
  std::size_t n_nonaffected = 0;
  std::string cluster;
};

/// Grid search for argmin_beta KS(A_a / beta, A_n). Rescaled affected scores
/// may exceed 1 and enter the KS computation unclamped; ties are broken
/// toward the largest beta (least intervention).
PropensityEstimate estimate_beta(const ScorePool& pool, const BetaGrid& grid = {});

/// query_id -> cluster_id.
using Clustering = std::map<std::string, std::string>;

struct PoolBuildResult {
  std::vector<ScorePool> pools;                // one per cluster, cluster-id sorted
  std::vector<std::string> skipped_clusters;   // clusters with a group absent
};

PoolBuildResult build_pools(const GroupedDataset& ds, const AttractivenessTable& table,
                            const Clustering& clustering);

struct EstimateSet {
  std::map<std::string, PropensityEstimate> by_cluster;
  std::vector<std::string> failed_clusters;
};

/// Independent estimate per pool; failures are collected, not propagated.
EstimateSet estimate_all(const std::vector<ScorePool>& pools, const BetaGrid& grid = {});

void write_estimates_csv(const EstimateSet& estimates, std::ostream& out);

}  // namespace gbl::estimator

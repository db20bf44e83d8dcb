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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbl/dataset.hpp"

namespace gbl::metrics {

/// Position-based browsing model with logarithmic exposure decay:
/// exposure at 1-based rank i is 1/log2(1+i). A cutoff of k zeroes exposure
/// below rank k.
struct ExposureModel {
  std::optional<int> cutoff;  // nullopt = full list
  double weight(int rank) const;
};

/// Rank weight 1/log2(1+rank), rank 1-based.
double exposure_weight(int rank);

/// Indices sorted by descending score; ties broken by ascending item id.
/// Throws when ids/scores lengths differ (a missing score).
std::vector<std::size_t> sort_by_score(std::span<const std::string> ids,
                                       std::span<const double> scores);

/// Sum over the top min(k, n) ranks of gain / log2(1 + rank).
double dcg_at_k(const std::vector<std::size_t>& ranking, std::span<const double> gains, int k);

/// dcg_at_k normalized by the ideal ordering; 1.0 when all gains are zero.
double ndcg_at_k(const std::vector<std::size_t>& ranking, std::span<const double> gains, int k);

/// NDCG with gains zeroed outside `target`; the ideal uses the zeroed gains.
double group_restricted_ndcg(const std::vector<std::size_t>& ranking, std::span<const double> gains,
                             std::span<const Group> groups, Group target, int k);

struct UtilityLabeling {
  std::vector<double> values;  // per item, in [0,1]
  double a_star = 0.5;         // discretization threshold, strictly inside (0,1)
};

/// Ideal per-item expected exposure for a utility labeling: discretize at
/// a_star, give every relevant item the mean exposure of ranks 1..m and every
/// non-relevant item the mean exposure of ranks m+1..n (uniform shuffling
/// within each equivalence class).
struct TargetExposure {
  std::vector<std::string> item_ids;
  std::vector<double> per_item;
  std::vector<char> relevant;  // discretized class per item
  std::vector<Group> groups;
  double affected = 0.0;     // full group sums of per_item
  double nonaffected = 0.0;
  double affected_merit = 0.0;  // group sums restricted to relevant items
  double nonaffected_merit = 0.0;
};

TargetExposure target_exposure(const UtilityLabeling& utilities, std::span<const std::string> ids,
                               std::span<const Group> groups, const ExposureModel& model = {});

/// Distance between two target-exposure vectors over the same item set.
struct EelDistance {
  double per_item_l2 = 0.0;  // l2 norm of the per-item difference
  double group_level = 0.0;  // 2 * |E_nonaffected(true) - E_nonaffected(observed)|
};

EelDistance eel_distance(const TargetExposure& target_true, const TargetExposure& target_observed);

/// (E_a / U_a) / (E_n / U_n); throws when either utility is zero.
double dtr(double exposure_affected, double exposure_nonaffected, double utility_affected,
           double utility_nonaffected);

/// Ratio of observed-to-true target group-exposure ratios,
/// (E~_a / E~_n) * (E_n / E_a), computed over each labeling's merit-bearing
/// (relevant) items. Throws when a divisor group exposure is zero.
double dtr_ratio(const TargetExposure& target_true, const TargetExposure& target_observed);

}  // namespace gbl::metrics

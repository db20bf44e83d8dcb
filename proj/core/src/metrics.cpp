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
#include "gbl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace gbl::metrics {

double exposure_weight(int rank) { return 1.0 / std::log2(1.0 + rank); }

double ExposureModel::weight(int rank) const {
  if (cutoff && rank > *cutoff) return 0.0;
  return exposure_weight(rank);
}

std::vector<std::size_t> sort_by_score(std::span<const std::string> ids,
                                       std::span<const double> scores) {
  if (ids.size() != scores.size())
    throw std::invalid_argument("sort_by_score: one score per item required");
  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  return idx;
}

double dcg_at_k(const std::vector<std::size_t>& ranking, std::span<const double> gains, int k) {
  if (k < 1) throw std::invalid_argument("dcg_at_k: k must be >= 1");
  const std::size_t top = std::min<std::size_t>(ranking.size(), static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t i = 0; i < top; ++i)
    dcg += gains[ranking[i]] * exposure_weight(static_cast<int>(i) + 1);
  return dcg;
}

double ndcg_at_k(const std::vector<std::size_t>& ranking, std::span<const double> gains, int k) {
  std::vector<double> sorted(gains.begin(), gains.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t top = std::min<std::size_t>(sorted.size(), static_cast<std::size_t>(std::max(k, 1)));
  double ideal = 0.0;
  for (std::size_t i = 0; i < top; ++i) ideal += sorted[i] * exposure_weight(static_cast<int>(i) + 1);
  if (ideal == 0.0) return 1.0;  // all-zero gains
  return dcg_at_k(ranking, gains, k) / ideal;
}

double group_restricted_ndcg(const std::vector<std::size_t>& ranking, std::span<const double> gains,
                             std::span<const Group> groups, Group target, int k) {
  if (gains.size() != groups.size())
    throw std::invalid_argument("group_restricted_ndcg: gains/groups size mismatch");
  std::vector<double> masked(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) masked[i] = groups[i] == target ? gains[i] : 0.0;
  return ndcg_at_k(ranking, masked, k);
}

TargetExposure target_exposure(const UtilityLabeling& utilities, std::span<const std::string> ids,
                               std::span<const Group> groups, const ExposureModel& model) {
  const std::size_t n = utilities.values.size();
  if (ids.size() != n || groups.size() != n)
    throw std::invalid_argument("target_exposure: ids/groups must match utilities");
  if (!(utilities.a_star > 0.0 && utilities.a_star < 1.0))
    throw std::invalid_argument("target_exposure: a_star must be strictly inside (0,1)");

  TargetExposure te;
  te.item_ids.assign(ids.begin(), ids.end());
  te.groups.assign(groups.begin(), groups.end());
  te.relevant.resize(n);
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    te.relevant[i] = utilities.values[i] > utilities.a_star ? 1 : 0;
    m += te.relevant[i];
  }

  double top_sum = 0.0, bot_sum = 0.0;
  for (std::size_t r = 1; r <= n; ++r) {
    double w = model.weight(static_cast<int>(r));
    (r <= m ? top_sum : bot_sum) += w;
  }
  const double top_mean = m > 0 ? top_sum / static_cast<double>(m) : 0.0;
  const double bot_mean = m < n ? bot_sum / static_cast<double>(n - m) : 0.0;

  te.per_item.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double e = te.relevant[i] ? top_mean : bot_mean;
    te.per_item[i] = e;
    if (te.groups[i] == Group::Affected) {
      te.affected += e;
      if (te.relevant[i]) te.affected_merit += e;
    } else if (te.groups[i] == Group::NonAffected) {
      te.nonaffected += e;
      if (te.relevant[i]) te.nonaffected_merit += e;
    } else {
      throw std::invalid_argument("target_exposure: unassigned group");
    }
  }
  return te;
}

namespace {

// Observed per-item exposure aligned with the true target's item order.
std::vector<double> aligned_observed(const TargetExposure& t, const TargetExposure& o) {
  if (t.item_ids == o.item_ids) return o.per_item;
  if (t.item_ids.size() != o.item_ids.size())
    throw std::invalid_argument("eel_distance: mismatched item sets");
  std::unordered_map<std::string, std::size_t> pos;
  pos.reserve(o.item_ids.size());
  for (std::size_t i = 0; i < o.item_ids.size(); ++i)
    if (!pos.emplace(o.item_ids[i], i).second)
      throw std::invalid_argument("eel_distance: duplicate item id '" + o.item_ids[i] + "'");
  std::vector<double> out(t.item_ids.size());
  for (std::size_t i = 0; i < t.item_ids.size(); ++i) {
    auto it = pos.find(t.item_ids[i]);
    if (it == pos.end())
      throw std::invalid_argument("eel_distance: item '" + t.item_ids[i] + "' missing from observed");
    out[i] = o.per_item[it->second];
  }
  return out;
}

}  // namespace

EelDistance eel_distance(const TargetExposure& target_true, const TargetExposure& target_observed) {
  std::vector<double> obs = aligned_observed(target_true, target_observed);
  double ss = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    double d = target_true.per_item[i] - obs[i];
    ss += d * d;
  }
  EelDistance res;
  res.per_item_l2 = std::sqrt(ss);
  res.group_level = 2.0 * std::abs(target_true.nonaffected - target_observed.nonaffected);
  return res;
}

double dtr(double exposure_affected, double exposure_nonaffected, double utility_affected,
           double utility_nonaffected) {
  if (utility_affected <= 0.0 || utility_nonaffected <= 0.0)
    throw std::invalid_argument("dtr: undefined for zero group utility");
  return (exposure_affected / utility_affected) / (exposure_nonaffected / utility_nonaffected);
}

double dtr_ratio(const TargetExposure& target_true, const TargetExposure& target_observed) {
  if (target_true.item_ids.size() != target_observed.item_ids.size())
    throw std::invalid_argument("dtr_ratio: mismatched item sets");
  const double ea = target_true.affected_merit;
  const double en = target_true.nonaffected_merit;
  const double oa = target_observed.affected_merit;
  const double on = target_observed.nonaffected_merit;
  if (en == 0.0 || ea == 0.0 || on == 0.0)
    throw std::invalid_argument("dtr_ratio: zero group exposure");
  return (oa / on) * (en / ea);
}

}  // namespace gbl::metrics

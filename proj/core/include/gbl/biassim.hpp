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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gbl/dataset.hpp"

namespace gbl {

struct BiasMode {
  double mean = 0.8;    // mu_beta, in (0,1]
  double weight = 1.0;  // mixture weight
};

/// Group-propensity model: one multiplicative factor per query, drawn from a
/// (possibly multi-mode) normal around the configured mean(s) and clamped
/// away from zero so downstream inverse-propensity division stays bounded.
struct BiasConfig {
  std::vector<BiasMode> modes{{0.8, 1.0}};
  double sigma_beta = 0.0;
  double beta_nonaffected = 1.0;
  double clamp_lo = 0.05;
  double clamp_hi = 1.0;
  double tiebreak_epsilon = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  BiasConfig with_seed(std::uint64_t s) const;
};

struct QueryAttractiveness {
  std::string query_id;
  double beta_q = 1.0;
  std::vector<double> values;  // aligned with Query::items
};

struct AttractivenessTable {
  std::vector<QueryAttractiveness> queries;  // aligned with GroupedDataset::queries
};

/// One draw per query: pick a mode by weight, draw Normal(mean, sigma_beta^2),
/// clamp to [clamp_lo, clamp_hi]. Deterministic in (config.seed, query_id).
double draw_query_propensity(const BiasConfig& config, const std::string& query_id);

/// a_d = beta_q * relevance for Affected items, a_d = relevance otherwise;
/// tie-break noise is applied afterwards when tiebreak_epsilon > 0.
AttractivenessTable simulate_attractiveness(const GroupedDataset& ds, const BiasConfig& config);

/// Adds i.i.d. Uniform(-eps, eps) per item and clamps to [0,1]. The effective
/// eps per query is capped at half the smallest positive within-group gap so
/// the within-group order of distinct values cannot change.
AttractivenessTable add_tiebreak_noise(const AttractivenessTable& table, const GroupedDataset& ds,
                                       double epsilon, std::uint64_t seed);

void write_attractiveness_csv(const AttractivenessTable& table, const GroupedDataset& ds,
                              std::ostream& out);

}  // namespace gbl

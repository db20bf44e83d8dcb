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

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gbl {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Group : std::uint8_t { Unassigned = 0, Affected, NonAffected };

const char* to_string(Group g);
Group group_from_string(const std::string& s);

/// A ranked candidate. `relevance` is the normalized utility in [0, 1];
/// integer grades 0..4 from LETOR-style files are mapped to g/4 on ingestion.
struct Item {
  std::string id;
  double relevance = 0.0;
  std::vector<std::pair<int, double>> features;  // sparse, ascending ids, absent = 0
  Group group = Group::Unassigned;

  double feature(int fid) const;
};

struct Query {
  std::string id;
  std::vector<Item> items;
  std::string cluster;  // empty = unassigned

  std::size_t count(Group g) const;
};

enum class ThresholdKind { Mean, MeanMinusStd, Explicit };

struct ThresholdRule {
  ThresholdKind kind = ThresholdKind::Mean;
  double value = 0.0;  // used by Explicit
};

struct GroupedDataset {
  std::vector<Query> queries;
  int group_feature = -1;
  ThresholdRule threshold_rule;
  double applied_threshold = 0.0;
  bool degenerate_threshold = false;  // MeanMinusStd fell back to Mean (zero variance)

  std::size_t total_items() const;
};

enum class RelevanceKind { UniformUnit, Bernoulli, GradedCategorical };

struct RelevanceDistribution {
  RelevanceKind kind = RelevanceKind::UniformUnit;
  double bernoulli_p = 0.5;
  std::array<double, 5> grade_probs = {0.2, 0.2, 0.2, 0.2, 0.2};

  /// Quantile transform: maps u in [0,1) to a relevance value in [0,1].
  double quantile(double u) const;
  void validate() const;
};

struct SyntheticSpec {
  int num_queries = 0;
  int items_per_query = 0;
  double affected_fraction = 0.5;  // in (0,1); round(f*n) >= 1 items per query are affected
  RelevanceDistribution relevance;
  std::uint64_t seed = 0;
  /// When > 0, items carry this many informative features (ids 1..F) plus a
  /// sensitive feature (id F+1) aligned with the group split at 0.5.
  /// Relevance becomes a rank-preserving function of the informative
  /// features whose marginal still follows `relevance` via the probability
  /// integral transform, so the same-distribution assumption stays intact.
  int num_informative_features = 0;

  int sensitive_feature_id() const { return num_informative_features + 1; }
  void validate() const;
};

/// Parses SVMlight/LETOR lines: "label qid:<id> <fid>:<val> ... [# comment]".
/// Labels are integers 0..4 (mapped to g/4) or reals in [0,1]. One Query per
/// distinct qid, ordered by first appearance; groups are left unassigned.
GroupedDataset parse_svmlight(std::istream& in);
GroupedDataset parse_svmlight_file(const std::string& path);
void serialize_svmlight(const GroupedDataset& ds, std::ostream& out);

/// Thresholds `feature_id` globally over all items: value below the threshold
/// means Affected. MeanMinusStd uses the population standard deviation and
/// falls back to Mean (flagged) when the variance is zero.
GroupedDataset assign_groups(const GroupedDataset& ds, int feature_id, ThresholdRule rule);

using QueryPredicate = std::function<bool(const Query&)>;

struct FilterResult {
  GroupedDataset dataset;
  double retained_fraction = 0.0;
  bool meets_min_fraction = false;
};

/// Drops queries that lack items from either group (plus any that fail
/// `extra`, when given). Throws if nothing survives. The retained fraction is
/// reported so callers can apply feature-selection criteria such as a 95%
/// retention requirement via `min_fraction`.
FilterResult filter_queries(const GroupedDataset& ds, double min_fraction = 0.0,
                            const QueryPredicate& extra = nullptr);

namespace predicates {
/// At least one item with relevance above `threshold` and one below.
QueryPredicate score_spread(double threshold);
}  // namespace predicates

/// Deterministic for a fixed spec: same spec, same bytes. Groups are assigned
/// directly (exactly round(affected_fraction * items_per_query) Affected items
/// per query, in seeded positions); relevance is i.i.d. across both groups.
GroupedDataset synthesize_dataset(const SyntheticSpec& spec);

/// Tabular score file: header `query_id,item_id,relevance,group,cluster_id`
/// plus optional trailing feature columns named f<id>.
void write_tabular_csv(const GroupedDataset& ds, std::ostream& out);
void write_tabular_csv_file(const GroupedDataset& ds, const std::string& path);
GroupedDataset parse_tabular_csv(std::istream& in);
GroupedDataset parse_tabular_csv_file(const std::string& path);

}  // namespace gbl

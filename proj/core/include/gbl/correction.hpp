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
#include <string>
#include <vector>

#include "gbl/biassim.hpp"
#include "gbl/dataset.hpp"
#include "gbl/estimator.hpp"

namespace gbl::correction {

struct CorrectedQuery {
  std::string query_id;
  double beta_used = 1.0;
  std::vector<double> values;  // aligned with Query::items
};

struct CorrectedLabels {
  std::vector<CorrectedQuery> queries;  // aligned with GroupedDataset::queries
  long clamped_count = 0;
  std::vector<std::string> fallback_queries;  // corrected via the global fallback estimate
};

/// Inverse-propensity correction: affected scores are divided by the cluster's
/// beta-hat and clamped to 1.0; non-affected scores pass through. Queries in
/// clusters without an estimate fall back to a global pooled estimate; if that
/// cannot be computed either, the offending query is reported in the error.
CorrectedLabels correct_scores(const AttractivenessTable& table, const GroupedDataset& ds,
                               const estimator::EstimateSet& estimates,
                               const estimator::Clustering& clustering,
                               const estimator::BetaGrid& grid = {});

/// Ground-truth comparison for synthetic runs: mean(corrected - relevance) per
/// group. A positive affected mean signals over-compensation (beta-hat below
/// the realized propensity).
struct OvercorrectionReport {
  double affected_mean_delta = 0.0;
  double nonaffected_mean_delta = 0.0;
  std::size_t affected_items = 0;
  std::size_t nonaffected_items = 0;
};

OvercorrectionReport overcorrection_report(const CorrectedLabels& corrected,
                                           const GroupedDataset& truth);

/// Same tabular CSV as the attractiveness table plus a beta_used column.
void write_corrected_csv(const CorrectedLabels& corrected, const GroupedDataset& ds,
                         std::ostream& out);

}  // namespace gbl::correction

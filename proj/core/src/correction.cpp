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
#include "gbl/correction.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace gbl::correction {

CorrectedLabels correct_scores(const AttractivenessTable& table, const GroupedDataset& ds,
                               const estimator::EstimateSet& estimates,
                               const estimator::Clustering& clustering,
                               const estimator::BetaGrid& grid) {
  if (table.queries.size() != ds.queries.size())
    throw std::invalid_argument("correct_scores: table/dataset size mismatch");

  std::optional<double> fallback;
  auto global_fallback = [&](const std::string& query_id) -> double {
    if (!fallback) {
      estimator::Clustering global;
      for (const auto& q : ds.queries) global[q.id] = "__global__";
      auto pools = estimator::build_pools(ds, table, global);
      if (pools.pools.empty())
        throw std::runtime_error("correct_scores: query '" + query_id +
                                 "' has no cluster estimate and no global fallback is computable");
      fallback = estimator::estimate_beta(pools.pools.front(), grid).beta_hat;
    }
    return *fallback;
  };

  CorrectedLabels out;
  out.queries.reserve(ds.queries.size());
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& q = ds.queries[qi];
    const auto& qa = table.queries[qi];
    auto cit = clustering.find(q.id);
    if (cit == clustering.end())
      throw std::invalid_argument("correct_scores: query '" + q.id + "' has no cluster assignment");
    double beta;
    auto eit = estimates.by_cluster.find(cit->second);
    if (eit != estimates.by_cluster.end()) {
      beta = eit->second.beta_hat;
    } else {
      beta = global_fallback(q.id);
      out.fallback_queries.push_back(q.id);
    }

    CorrectedQuery cq;
    cq.query_id = q.id;
    cq.beta_used = beta;
    cq.values.reserve(q.items.size());
    for (std::size_t i = 0; i < q.items.size(); ++i) {
      double v = qa.values[i];
      if (q.items[i].group == Group::Affected) {
        v /= beta;
        if (v > 1.0) {
          v = 1.0;
          ++out.clamped_count;
        }
      }
      cq.values.push_back(v);
    }
    out.queries.push_back(std::move(cq));
  }
  return out;
}

OvercorrectionReport overcorrection_report(const CorrectedLabels& corrected,
                                           const GroupedDataset& truth) {
  if (corrected.queries.size() != truth.queries.size())
    throw std::invalid_argument("overcorrection_report: size mismatch");
  OvercorrectionReport rep;
  double aff = 0.0, non = 0.0;
  for (std::size_t qi = 0; qi < truth.queries.size(); ++qi) {
    const auto& q = truth.queries[qi];
    const auto& cq = corrected.queries[qi];
    for (std::size_t i = 0; i < q.items.size(); ++i) {
      double delta = cq.values[i] - q.items[i].relevance;
      if (q.items[i].group == Group::Affected) {
        aff += delta;
        ++rep.affected_items;
      } else {
        non += delta;
        ++rep.nonaffected_items;
      }
    }
  }
  rep.affected_mean_delta = rep.affected_items ? aff / static_cast<double>(rep.affected_items) : 0.0;
  rep.nonaffected_mean_delta =
      rep.nonaffected_items ? non / static_cast<double>(rep.nonaffected_items) : 0.0;
  return rep;
}

void write_corrected_csv(const CorrectedLabels& corrected, const GroupedDataset& ds,
                         std::ostream& out) {
  if (corrected.queries.size() != ds.queries.size())
    throw std::invalid_argument("write_corrected_csv: size mismatch");
  auto fmt = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  out << "query_id,item_id,attractiveness,beta_used\n";
  for (std::size_t qi = 0; qi < corrected.queries.size(); ++qi) {
    const auto& cq = corrected.queries[qi];
    const auto& q = ds.queries[qi];
    for (std::size_t i = 0; i < cq.values.size(); ++i)
      out << cq.query_id << ',' << q.items[i].id << ',' << fmt(cq.values[i]) << ','
          << fmt(cq.beta_used) << '\n';
  }
}

}  // namespace gbl::correction

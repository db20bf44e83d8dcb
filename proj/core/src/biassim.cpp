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
#include "gbl/biassim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "gbl/rng.hpp"

namespace gbl {

void BiasConfig::validate() const {
  if (modes.empty()) throw std::invalid_argument("BiasConfig: modes must be non-empty");
  double wsum = 0.0;
  for (const auto& m : modes) {
    if (m.mean <= 0.0 || m.mean > 1.0) throw std::invalid_argument("BiasConfig: mode mean must be in (0,1]");
    if (m.weight < 0.0) throw std::invalid_argument("BiasConfig: mode weight must be nonnegative");
    wsum += m.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("BiasConfig: mode weights must sum to 1");
  if (sigma_beta < 0.0) throw std::invalid_argument("BiasConfig: sigma_beta must be >= 0");
  if (!(clamp_lo > 0.0 && clamp_lo <= clamp_hi && clamp_hi <= 1.0))
    throw std::invalid_argument("BiasConfig: need 0 < clamp_lo <= clamp_hi <= 1");
  if (tiebreak_epsilon < 0.0) throw std::invalid_argument("BiasConfig: tiebreak_epsilon must be >= 0");
}

BiasConfig BiasConfig::with_seed(std::uint64_t s) const {
  BiasConfig c = *this;
  c.seed = s;
  return c;
}

double draw_query_propensity(const BiasConfig& config, const std::string& query_id) {
  config.validate();
  Rng rng = Rng(config.seed).keyed("propensity").keyed(query_id);
  double mean = config.modes.front().mean;
  if (config.modes.size() > 1) {
    double u = rng.next_double();
    double cum = 0.0;
    for (const auto& m : config.modes) {
      cum += m.weight;
      if (u < cum) {
        mean = m.mean;
        break;
      }
      mean = m.mean;  // numeric slack: last mode catches u ~ 1
    }
  }
  double beta = config.sigma_beta > 0.0 ? rng.normal(mean, config.sigma_beta) : mean;
  return std::clamp(beta, config.clamp_lo, config.clamp_hi);
}

AttractivenessTable simulate_attractiveness(const GroupedDataset& ds, const BiasConfig& config) {
  config.validate();
  AttractivenessTable table;
  table.queries.reserve(ds.queries.size());
  for (const auto& q : ds.queries) {
    QueryAttractiveness qa;
    qa.query_id = q.id;
    qa.beta_q = draw_query_propensity(config, q.id);
    qa.values.reserve(q.items.size());
    for (const auto& it : q.items) {
      if (it.group == Group::Unassigned)
        throw std::invalid_argument("simulate_attractiveness: query '" + q.id + "' has unassigned groups");
      double beta = it.group == Group::Affected ? qa.beta_q : config.beta_nonaffected;
      qa.values.push_back(beta * it.relevance);
    }
    table.queries.push_back(std::move(qa));
  }
  if (config.tiebreak_epsilon > 0.0)
    table = add_tiebreak_noise(table, ds, config.tiebreak_epsilon, config.seed);
  return table;
}

AttractivenessTable add_tiebreak_noise(const AttractivenessTable& table, const GroupedDataset& ds,
                                       double epsilon, std::uint64_t seed) {
  if (epsilon < 0.0) throw std::invalid_argument("add_tiebreak_noise: epsilon must be >= 0");
  if (table.queries.size() != ds.queries.size())
    throw std::invalid_argument("add_tiebreak_noise: table/dataset size mismatch");
  if (epsilon == 0.0) return table;

  AttractivenessTable out = table;
  Rng root = Rng(seed).keyed("tiebreak");
  for (std::size_t qi = 0; qi < out.queries.size(); ++qi) {
    auto& qa = out.queries[qi];
    const auto& q = ds.queries[qi];
    if (qa.values.size() != q.items.size())
      throw std::invalid_argument("add_tiebreak_noise: item count mismatch in query '" + q.id + "'");

    // Smallest positive gap between within-group attractiveness values.
    double min_gap = std::numeric_limits<double>::infinity();
    for (Group g : {Group::Affected, Group::NonAffected}) {
      std::vector<double> vals;
      for (std::size_t i = 0; i < q.items.size(); ++i)
        if (q.items[i].group == g) vals.push_back(qa.values[i]);
      std::sort(vals.begin(), vals.end());
      for (std::size_t i = 1; i < vals.size(); ++i) {
        double gap = vals[i] - vals[i - 1];
        if (gap > 0.0) min_gap = std::min(min_gap, gap);
      }
    }
    double eff = std::isfinite(min_gap) ? std::min(epsilon, min_gap / 2.0) : epsilon;

    Rng qrng = root.keyed(q.id);
    for (std::size_t i = 0; i < qa.values.size(); ++i) {
      double noise = qrng.keyed(q.items[i].id).uniform(-eff, eff);
      qa.values[i] = std::clamp(qa.values[i] + noise, 0.0, 1.0);
    }
  }
  return out;
}

void write_attractiveness_csv(const AttractivenessTable& table, const GroupedDataset& ds,
                              std::ostream& out) {
  if (table.queries.size() != ds.queries.size())
    throw std::invalid_argument("write_attractiveness_csv: table/dataset size mismatch");
  auto fmt = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  out << "query_id,item_id,attractiveness,beta_q\n";
  for (std::size_t qi = 0; qi < table.queries.size(); ++qi) {
    const auto& qa = table.queries[qi];
    const auto& q = ds.queries[qi];
    for (std::size_t i = 0; i < qa.values.size(); ++i)
      out << qa.query_id << ',' << q.items[i].id << ',' << fmt(qa.values[i]) << ',' << fmt(qa.beta_q)
          << '\n';
  }
}

}  // namespace gbl

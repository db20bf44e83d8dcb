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
#include "gbl/ltr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "gbl/metrics.hpp"
#include "gbl/rng.hpp"
#include "gbl/stats.hpp"

namespace gbl::ltr {

double Scorer::score(const Item& item) const {
  double s = bias;
  for (const auto& [fid, val] : item.features) {
    if (fid >= 0 && static_cast<std::size_t>(fid) < weights.size())
      s += weights[static_cast<std::size_t>(fid)] * val;
  }
  return s;
}

void save_scorer(const Scorer& s, std::ostream& out) {
  auto fmt = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (double w : s.weights) out << fmt(w) << '\n';
  out << fmt(s.bias) << '\n';
}

Scorer load_scorer(std::istream& in) {
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v;
    auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc()) throw std::runtime_error("load_scorer: bad line '" + line + "'");
    values.push_back(v);
  }
  if (values.empty()) throw std::runtime_error("load_scorer: empty input");
  Scorer s;
  s.bias = values.back();
  values.pop_back();
  s.weights = std::move(values);
  return s;
}

LabelTable true_labels(const GroupedDataset& ds) {
  LabelTable t;
  t.reserve(ds.queries.size());
  for (const auto& q : ds.queries) {
    std::vector<double> row;
    row.reserve(q.items.size());
    for (const auto& it : q.items) row.push_back(it.relevance);
    t.push_back(std::move(row));
  }
  return t;
}

std::vector<double> lambdarank_gradients(std::span<const double> scores,
                                         std::span<const double> labels, int cutoff,
                                         bool weight_by_delta_ndcg) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("lambdarank_gradients: scores/labels size mismatch");
  const std::size_t n = scores.size();
  std::vector<double> grad(n, 0.0);
  if (n < 2) return grad;

  std::vector<std::size_t> pos_of(n);
  double ideal = 0.0;
  if (weight_by_delta_ndcg) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    for (std::size_t r = 0; r < n; ++r) pos_of[order[r]] = r + 1;  // 1-based rank

    std::vector<double> sorted(labels.begin(), labels.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t top = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(cutoff, 1)));
    for (std::size_t r = 0; r < top; ++r)
      ideal += sorted[r] * metrics::exposure_weight(static_cast<int>(r) + 1);
  }
  auto discount = [&](std::size_t rank1b) {
    if (cutoff > 0 && rank1b > static_cast<std::size_t>(cutoff)) return 0.0;
    return metrics::exposure_weight(static_cast<int>(rank1b));
  };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!(labels[i] > labels[j])) continue;
      double lambda = 1.0 / (1.0 + std::exp(scores[i] - scores[j]));  // sigmoid(s_j - s_i)
      if (weight_by_delta_ndcg) {
        if (ideal <= 0.0) continue;
        double delta = std::abs(labels[i] - labels[j]) *
                       std::abs(discount(pos_of[i]) - discount(pos_of[j])) / ideal;
        lambda *= delta;
      }
      grad[i] += lambda;
      grad[j] -= lambda;
    }
  }
  return grad;
}

namespace {

int feature_dimension(const GroupedDataset& ds) {
  int max_fid = -1;
  for (const auto& q : ds.queries)
    for (const auto& it : q.items)
      for (const auto& [fid, _] : it.features) max_fid = std::max(max_fid, fid);
  return max_fid + 1;
}

}  // namespace

TrainResult train(const GroupedDataset& ds, const LabelTable& labels, const TrainConfig& config) {
  if (labels.size() != ds.queries.size()) throw std::invalid_argument("train: label table size mismatch");
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi)
    if (labels[qi].size() != ds.queries[qi].items.size())
      throw std::invalid_argument("train: label row size mismatch in query '" + ds.queries[qi].id + "'");
  const int dim = feature_dimension(ds);
  if (dim <= 0) throw std::invalid_argument("train: dataset has no features");

  TrainResult res;
  res.scorer.weights.assign(static_cast<std::size_t>(dim), 0.0);
  res.scorer.bias = 0.0;

  std::vector<std::size_t> visit(ds.queries.size());
  std::iota(visit.begin(), visit.end(), std::size_t{0});
  Rng shuffle_rng = Rng(config.seed).keyed("train-shuffle");

  std::vector<double> scores, wgrad(static_cast<std::size_t>(dim));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(visit);
    std::fill(wgrad.begin(), wgrad.end(), 0.0);
    std::vector<double> epoch_ndcg;
    epoch_ndcg.reserve(ds.queries.size());
    for (std::size_t qi : visit) {
      const auto& q = ds.queries[qi];
      scores.resize(q.items.size());
      std::vector<std::string> ids(q.items.size());
      for (std::size_t i = 0; i < q.items.size(); ++i) {
        scores[i] = res.scorer.score(q.items[i]);
        ids[i] = q.items[i].id;
      }
      auto grad = lambdarank_gradients(scores, labels[qi], config.ndcg_cutoff_for_deltas);
      for (std::size_t i = 0; i < q.items.size(); ++i) {
        if (grad[i] == 0.0) continue;
        for (const auto& [fid, val] : q.items[i].features)
          wgrad[static_cast<std::size_t>(fid)] += grad[i] * val;
      }
      auto ranking = metrics::sort_by_score(ids, scores);
      epoch_ndcg.push_back(metrics::ndcg_at_k(ranking, labels[qi], config.ndcg_cutoff_for_deltas));
    }
    for (std::size_t f = 0; f < wgrad.size(); ++f)
      res.scorer.weights[f] += config.learning_rate * wgrad[f] / static_cast<double>(ds.queries.size());
    res.ndcg_trace.push_back(stats::mean(epoch_ndcg));
  }

  if (config.epochs == 0) {
    // Trace the untrained scorer once so callers still get a baseline.
    std::vector<double> epoch_ndcg;
    for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
      const auto& q = ds.queries[qi];
      std::vector<double> sc(q.items.size(), 0.0);
      std::vector<std::string> ids(q.items.size());
      for (std::size_t i = 0; i < q.items.size(); ++i) ids[i] = q.items[i].id;
      auto ranking = metrics::sort_by_score(ids, sc);
      epoch_ndcg.push_back(metrics::ndcg_at_k(ranking, labels[qi], config.ndcg_cutoff_for_deltas));
    }
    res.ndcg_trace.push_back(stats::mean(epoch_ndcg));
  }
  return res;
}

EvalReport evaluate(const Scorer& scorer, const GroupedDataset& test, int k, double a_star) {
  EvalReport rep;
  std::vector<double> ndcgs, ndcgs_a, ndcgs_n, dtrs, eels;
  for (const auto& q : test.queries) {
    const std::size_t n = q.items.size();
    std::vector<double> scores(n), gains(n);
    std::vector<std::string> ids(n);
    std::vector<Group> groups(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = scorer.score(q.items[i]);
      gains[i] = q.items[i].relevance;
      ids[i] = q.items[i].id;
      groups[i] = q.items[i].group;
    }
    auto ranking = metrics::sort_by_score(ids, scores);
    ndcgs.push_back(metrics::ndcg_at_k(ranking, gains, k));
    ndcgs_a.push_back(metrics::group_restricted_ndcg(ranking, gains, groups, Group::Affected, k));
    ndcgs_n.push_back(metrics::group_restricted_ndcg(ranking, gains, groups, Group::NonAffected, k));

    // Scorer-induced utility labeling: min-max normalize scores into [0,1].
    double lo = *std::min_element(scores.begin(), scores.end());
    double hi = *std::max_element(scores.begin(), scores.end());
    std::vector<double> norm(n, 0.5);
    if (hi > lo)
      for (std::size_t i = 0; i < n; ++i) norm[i] = (scores[i] - lo) / (hi - lo);
    auto target_true = metrics::target_exposure({gains, a_star}, ids, groups);
    auto target_pred = metrics::target_exposure({norm, a_star}, ids, groups);
    eels.push_back(metrics::eel_distance(target_true, target_pred).per_item_l2);
    try {
      dtrs.push_back(metrics::dtr_ratio(target_true, target_pred));
    } catch (const std::invalid_argument&) {
      // zero group exposure: skip the ratio for this query
    }
  }
  rep.per_query_ndcg = ndcgs;
  rep.ndcg = stats::mean(ndcgs);
  rep.ndcg_affected = stats::mean(ndcgs_a);
  rep.ndcg_nonaffected = stats::mean(ndcgs_n);
  rep.dtr_ratio = dtrs.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(dtrs);
  rep.eel = stats::mean(eels);
  return rep;
}

}  // namespace gbl::ltr

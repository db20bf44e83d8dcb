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
#include <span>
#include <string>
#include <vector>

#include "gbl/dataset.hpp"

namespace gbl::ltr {

/// Linear scorer over the (dense-expanded) feature vector.
struct Scorer {
  std::vector<double> weights;
  double bias = 0.0;

  double score(const Item& item) const;
};

void save_scorer(const Scorer& s, std::ostream& out);  // one weight per line, then bias
Scorer load_scorer(std::istream& in);

enum class LabelSource { True, Biased, Corrected };

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 50;
  int ndcg_cutoff_for_deltas = 10;
  std::uint64_t seed = 0;
  LabelSource label_source = LabelSource::True;
};

/// Per-item labels aligned with GroupedDataset queries/items.
using LabelTable = std::vector<std::vector<double>>;

LabelTable true_labels(const GroupedDataset& ds);

/// Pairwise gradients: for items i, j with label_i > label_j the pair
/// contributes sigmoid(s_j - s_i) (times |delta NDCG@cutoff| from swapping the
/// two, when enabled) pushing i up and j down. The unweighted form is the
/// exact gradient of the pairwise logistic surrogate.
std::vector<double> lambdarank_gradients(std::span<const double> scores,
                                         std::span<const double> labels, int cutoff,
                                         bool weight_by_delta_ndcg = true);

struct TrainResult {
  Scorer scorer;
  std::vector<double> ndcg_trace;  // training NDCG@cutoff per epoch
};

/// Full-batch gradient ascent from zero weights: per epoch, lambda gradients
/// are accumulated over all queries (visited in a seeded shuffled order) and
/// applied as one synchronous update.
TrainResult train(const GroupedDataset& ds, const LabelTable& labels, const TrainConfig& config);

struct EvalReport {
  double ndcg = 0.0;
  double ndcg_affected = 0.0;
  double ndcg_nonaffected = 0.0;
  double dtr_ratio = 0.0;
  double eel = 0.0;
  std::vector<double> per_query_ndcg;
};

/// Ranks test queries by the scorer and reports quality against the true
/// relevance plus fairness of the scorer-induced target exposure (scores are
/// min-max normalized per query before discretization) versus the true target.
EvalReport evaluate(const Scorer& scorer, const GroupedDataset& test, int k = 10,
                    double a_star = 0.5);

}  // namespace gbl::ltr

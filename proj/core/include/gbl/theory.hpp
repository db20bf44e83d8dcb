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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gbl/biassim.hpp"
#include "gbl/dataset.hpp"

namespace gbl::theory {

struct GroupCounts {
  int n_a = 0;       // affected candidates
  int n_n = 0;       // non-affected candidates
  int n_plus_a = 0;  // affected relevant
  int n_plus_n = 0;  // non-affected relevant

  int n() const { return n_a + n_n; }
  void validate() const;
};

/// E[nu] for uniformly distributed scores: max(2 - 1/beta, 0).
double expected_nu(double beta);

/// Empirical fraction of affected relevant items whose attractiveness still
/// exceeds the minimum attractiveness of the non-affected relevant items.
/// `a_star` discretizes true relevance into relevant / non-relevant; the
/// attractiveness cutoff itself is the per-query (or pooled) non-affected
/// relevant minimum.
struct EmpiricalNu {
  std::vector<std::pair<std::string, double>> per_query;
  double mean_per_query = 0.0;
  /// nu computed with the dataset-global non-affected relevant minimum and
  /// pooled counts. The per-query minimum is biased upward on short lists, so
  /// this is the estimate that converges to the closed form.
  double pooled = 0.0;
  int excluded_queries = 0;
};

EmpiricalNu empirical_nu(const AttractivenessTable& table, const GroupedDataset& ds,
                         double a_star = 0.5);

/// Misplacement density for uniform scores:
/// (1-nu) n+_a / (n_n - n+_n + (1-nu) n+_a); 0 when the denominator vanishes.
double xi_uniform(double nu, const GroupCounts& counts);

/// Expected DCG of the attractiveness-sorted list at the given nu:
/// sum_{i<=k1} w_i + xi * sum_{k1<i<=k2} w_i with k1 = round(n+_n + nu n+_a),
/// k2 = n_n + n+_a and w_i = 1/log2(1+i).
double expected_dcg(double nu, const GroupCounts& counts);

/// Least-squares linear approximation of expected_dcg in nu over [0,1].
struct DcgLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_rel_error = 0.0;  // over the fit grid
};

DcgLinearFit dcg_linear_fit(const GroupCounts& counts);

/// Affine-in-log approximations of the mean exposure of the top-m ranks
/// (alpha, c) and of the remaining ranks (alpha_prime, c_prime):
///   (1/m)     sum_{i=1..m}   1/log2(1+i) ~ alpha  * log2(m) + c
///   (1/(n-m)) sum_{i=m+1..n} 1/log2(1+i) ~ alpha' * log2(m) + c'
/// Chebyshev (minimax relative error) fit over the grid m in {1..n-2}.
struct ExposureFit {
  int n = 0;
  double alpha = 0.0;
  double c = 0.0;
  double alpha_prime = 0.0;
  double c_prime = 0.0;
  double max_rel_error = 0.0;
  double log_base = 2.0;
};

ExposureFit fit_exposure_coefficients(int n);

/// Closed-form magnitude of the target-exposure change of EEL:
/// -2 (alpha n+_n + alpha' (n_n - n+_n)) *
///    log2((n+_n + n+_a) / (n+_n + nu n+_a)).
/// Throws when no items are perceived relevant (zero denominator).
double eel_approx(double nu, const GroupCounts& counts, const ExposureFit& fit);

/// The target-exposure ratio of DTR under group bias equals nu.
double dtr_theory(double nu);

/// Grouped decomposition of the biased ranking objective:
/// sum_g beta_g sum_{d in g} lambda_d * relevance_d.
double biased_objective(std::span<const double> lambda_weights, std::span<const double> relevances,
                        std::span<const Group> groups, double beta_affected,
                        double beta_nonaffected = 1.0);

}  // namespace gbl::theory

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
#include "gbl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gbl/metrics.hpp"

namespace gbl::theory {

void GroupCounts::validate() const {
  if (n_a < 0 || n_n < 0 || n_plus_a < 0 || n_plus_n < 0)
    throw std::invalid_argument("GroupCounts: negative count");
  if (n_plus_a > n_a || n_plus_n > n_n)
    throw std::invalid_argument("GroupCounts: relevant count exceeds group size");
  if (n() < 1) throw std::invalid_argument("GroupCounts: need at least one item");
}

double expected_nu(double beta) {
  if (beta <= 0.0 || beta > 1.0) throw std::invalid_argument("expected_nu: beta must be in (0,1]");
  return std::max(2.0 - 1.0 / beta, 0.0);
}

EmpiricalNu empirical_nu(const AttractivenessTable& table, const GroupedDataset& ds, double a_star) {
  if (table.queries.size() != ds.queries.size())
    throw std::invalid_argument("empirical_nu: table/dataset size mismatch");
  EmpiricalNu res;
  double per_query_sum = 0.0;
  long pooled_num = 0, pooled_den = 0;
  double global_astar = std::numeric_limits<double>::infinity();
  struct Deferred {
    std::vector<double> affected_rel;  // attractiveness of affected relevant items
  };
  std::vector<Deferred> deferred(ds.queries.size());

  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    const auto& q = ds.queries[qi];
    const auto& qa = table.queries[qi];
    double qmin = std::numeric_limits<double>::infinity();
    auto& d = deferred[qi];
    for (std::size_t i = 0; i < q.items.size(); ++i) {
      if (q.items[i].relevance <= a_star) continue;
      if (q.items[i].group == Group::NonAffected)
        qmin = std::min(qmin, qa.values[i]);
      else if (q.items[i].group == Group::Affected)
        d.affected_rel.push_back(qa.values[i]);
      else
        throw std::invalid_argument("empirical_nu: unassigned group in query '" + q.id + "'");
    }
    global_astar = std::min(global_astar, qmin);
    if (d.affected_rel.empty() || !std::isfinite(qmin)) {
      ++res.excluded_queries;
      continue;
    }
    long num = static_cast<long>(std::count_if(d.affected_rel.begin(), d.affected_rel.end(),
                                               [&](double a) { return a > qmin; }));
    double nu = static_cast<double>(num) / static_cast<double>(d.affected_rel.size());
    res.per_query.emplace_back(q.id, nu);
    per_query_sum += nu;
  }

  if (!std::isfinite(global_astar))
    throw std::runtime_error("empirical_nu: no non-affected relevant items in the dataset");
  for (const auto& d : deferred) {
    for (double a : d.affected_rel) {
      ++pooled_den;
      pooled_num += a > global_astar;
    }
  }
  if (pooled_den == 0) throw std::runtime_error("empirical_nu: no affected relevant items");

  res.mean_per_query = res.per_query.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : per_query_sum / static_cast<double>(res.per_query.size());
  res.pooled = static_cast<double>(pooled_num) / static_cast<double>(pooled_den);
  return res;
}

double xi_uniform(double nu, const GroupCounts& counts) {
  counts.validate();
  double denom = counts.n_n - counts.n_plus_n + (1.0 - nu) * counts.n_plus_a;
  if (denom <= 0.0) return 0.0;  // no misplaced mass
  return (1.0 - nu) * counts.n_plus_a / denom;
}

double expected_dcg(double nu, const GroupCounts& counts) {
  counts.validate();
  if (nu < 0.0 || nu > 1.0) throw std::invalid_argument("expected_dcg: nu must be in [0,1]");
  const int k1 = static_cast<int>(std::lround(counts.n_plus_n + nu * counts.n_plus_a));
  const int k2 = counts.n_n + counts.n_plus_a;
  const double xi = xi_uniform(nu, counts);
  double value = 0.0;
  for (int i = 1; i <= k1; ++i) value += metrics::exposure_weight(i);
  for (int i = k1 + 1; i <= k2; ++i) value += xi * metrics::exposure_weight(i);
  return value;
}

DcgLinearFit dcg_linear_fit(const GroupCounts& counts) {
  counts.validate();
  const int grid = 100;  // nu = 0, 0.01, ..., 1.00
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs, ys;
  xs.reserve(grid + 1);
  ys.reserve(grid + 1);
  for (int i = 0; i <= grid; ++i) {
    double nu = static_cast<double>(i) / grid;
    double v = expected_dcg(nu, counts);
    xs.push_back(nu);
    ys.push_back(v);
    sx += nu;
    sy += v;
    sxx += nu * nu;
    sxy += nu * v;
  }
  const double n = grid + 1;
  DcgLinearFit fit;
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double pred = fit.slope * xs[i] + fit.intercept;
    if (ys[i] > 0.0) fit.max_rel_error = std::max(fit.max_rel_error, std::abs(pred - ys[i]) / ys[i]);
  }
  return fit;
}

namespace {

struct AffineFit {
  double a = 0.0;
  double c = 0.0;
  double max_rel_error = 0.0;
};

double max_rel_error_of(double a, double c, const std::vector<double>& x, const std::vector<double>& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(a * x[i] + c - f[i]) / f[i]);
  return worst;
}

// Minimax (Chebyshev) affine fit in relative error on a small grid: the
// optimum equioscillates on three points with alternating residual signs, so
// enumerating basis triples and keeping the candidate with the smallest true
// maximum is exact up to floating point.
AffineFit minimax_relative_fit(const std::vector<double>& x, const std::vector<double>& f) {
  const std::size_t k = x.size();
  AffineFit best;
  if (k == 1) {
    best.c = f[0];
    return best;
  }
  if (k == 2) {
    best.a = (f[1] - f[0]) / (x[1] - x[0]);
    best.c = f[0] - best.a * x[0];
    return best;
  }
  best.max_rel_error = std::numeric_limits<double>::infinity();
  auto consider = [&](double a, double c) {
    double err = max_rel_error_of(a, c, x, f);
    if (err < best.max_rel_error) best = {a, c, err};
  };
  // Seed with ordinary least squares.
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < k; ++i) {
      sx += x[i];
      sy += f[i];
      sxx += x[i] * x[i];
      sxy += x[i] * f[i];
    }
    double n = static_cast<double>(k);
    double a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    consider(a, (sy - a * sx) / n);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      for (std::size_t l = j + 1; l < k; ++l) {
        for (int s : {1, -1}) {
          // Solve: a*x + c - f = sign * t * f on the triple with alternating signs.
          //   [x_i  1  -s*f_i] [a]   [f_i]
          //   [x_j  1  +s*f_j] [c] = [f_j]
          //   [x_l  1  -s*f_l] [t]   [f_l]
          const double m[3][4] = {
              {x[i], 1.0, -s * f[i], f[i]},
              {x[j], 1.0, s * f[j], f[j]},
              {x[l], 1.0, -s * f[l], f[l]},
          };
          double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
          if (std::abs(det) < 1e-14) continue;
          auto det3 = [&](int col) {
            double mm[3][3];
            for (int r = 0; r < 3; ++r)
              for (int cidx = 0; cidx < 3; ++cidx) mm[r][cidx] = cidx == col ? m[r][3] : m[r][cidx];
            return mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1]) -
                   mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0]) +
                   mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]);
          };
          double a = det3(0) / det;
          double c = det3(1) / det;
          double t = det3(2) / det;
          if (t >= 0.0) consider(a, c);
        }
      }
    }
  }
  return best;
}

}  // namespace

ExposureFit fit_exposure_coefficients(int n) {
  if (n < 3) throw std::invalid_argument("fit_exposure_coefficients: n must be >= 3");
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) w[static_cast<std::size_t>(i - 1)] = metrics::exposure_weight(i);

  const int m_hi = std::max(1, n - 2);
  std::vector<double> x, f_top, f_bot;
  double run = 0.0;
  for (int m = 1; m <= m_hi; ++m) {
    run += w[static_cast<std::size_t>(m - 1)];
    double tail = 0.0;
    for (int i = m + 1; i <= n; ++i) tail += w[static_cast<std::size_t>(i - 1)];
    x.push_back(std::log2(static_cast<double>(m)));
    f_top.push_back(run / m);
    f_bot.push_back(tail / (n - m));
  }

  AffineFit top = minimax_relative_fit(x, f_top);
  AffineFit bot = minimax_relative_fit(x, f_bot);

  ExposureFit fit;
  fit.n = n;
  fit.alpha = top.a;
  fit.c = top.c;
  fit.alpha_prime = bot.a;
  fit.c_prime = bot.c;
  fit.max_rel_error = std::max(top.max_rel_error, bot.max_rel_error);
  fit.log_base = 2.0;
  return fit;
}

double eel_approx(double nu, const GroupCounts& counts, const ExposureFit& fit) {
  counts.validate();
  const double m_full = counts.n_plus_n + counts.n_plus_a;
  const double m_obs = counts.n_plus_n + nu * counts.n_plus_a;
  if (m_obs <= 0.0) throw std::invalid_argument("eel_approx: no perceived relevant items");
  if (m_full <= 0.0) return 0.0;
  const double coeff = fit.alpha * counts.n_plus_n + fit.alpha_prime * (counts.n_n - counts.n_plus_n);
  return -2.0 * coeff * std::log2(m_full / m_obs);
}

double dtr_theory(double nu) {
  if (nu < 0.0 || nu > 1.0) throw std::invalid_argument("dtr_theory: nu must be in [0,1]");
  return nu;
}

double biased_objective(std::span<const double> lambda_weights, std::span<const double> relevances,
                        std::span<const Group> groups, double beta_affected,
                        double beta_nonaffected) {
  if (lambda_weights.size() != relevances.size() || relevances.size() != groups.size())
    throw std::invalid_argument("biased_objective: one lambda and relevance per item required");
  double aff = 0.0, non = 0.0;
  for (std::size_t i = 0; i < relevances.size(); ++i) {
    double term = lambda_weights[i] * relevances[i];
    (groups[i] == Group::Affected ? aff : non) += term;
  }
  return beta_affected * aff + beta_nonaffected * non;
}

}  // namespace gbl::theory

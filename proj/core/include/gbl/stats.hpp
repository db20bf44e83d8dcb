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
#include <vector>

namespace gbl::stats {

double mean(std::span<const double> v);

/// Population standard deviation (the aggregation used in reports).
double stddev(std::span<const double> v);

/// Standard normal CDF.
double normal_cdf(double z);

struct WilcoxonResult {
  double w_plus = 0.0;   // rank sum of positive differences
  double w_minus = 0.0;
  int n_nonzero = 0;     // pairs after dropping zero differences
  double p_value = 1.0;  // two-sided
  bool exact = false;    // exact null distribution vs normal approximation
};

/// Paired two-sided Wilcoxon signed-rank test. Zero differences are dropped.
/// The exact null distribution is used for n <= 25 without tied magnitudes;
/// otherwise a tie-corrected normal approximation.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

}  // namespace gbl::stats

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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gbl/biassim.hpp"
#include "gbl/dataset.hpp"
#include "gbl/estimator.hpp"
#include "gbl/ltr.hpp"

namespace gbl::runner {

enum class ClusteringKind { Oracle, UniformRandom, Singleton, Global };

struct ClusteringSpec {
  ClusteringKind kind = ClusteringKind::Global;
  int cluster_size = 10;     // UniformRandom
  std::string oracle_path;   // Oracle: CSV query_id,cluster_id
};

enum class CorrectionMode { None, PerQuery, Amortized };

enum class FileFormat { Svmlight, Tabular };

struct ExperimentConfig {
  // Dataset source: synthetic spec or file.
  bool synthetic = true;
  SyntheticSpec synthetic_spec;
  std::string file_path;
  FileFormat file_format = FileFormat::Tabular;

  std::optional<int> sensitive_feature;
  ThresholdRule threshold_rule;
  double min_retained_fraction = 0.0;

  std::vector<BiasConfig> bias_grid;
  ClusteringSpec clustering;
  std::vector<int> cluster_size_grid{1, 3, 10, 30, 100};
  CorrectionMode correction = CorrectionMode::Amortized;
  estimator::BetaGrid estimation_grid;

  int metrics_cutoff = 10;
  double a_star = 0.5;
  std::vector<std::uint64_t> seeds;
  std::optional<ltr::TrainConfig> ltr;

  void validate() const;
};

/// Loads the documented JSON config. GBL_SEED_OFFSET (unsigned, default 0) is
/// added to every seed in the file.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_json(const std::string& text);
SyntheticSpec parse_synthetic_spec_json(const std::string& text);
std::string config_hash(const ExperimentConfig& config);

using Cell = std::vector<std::pair<std::string, std::string>>;

struct ReportRow {
  Cell cell;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
  std::optional<double> p_value;
};

struct RawRow {
  Cell cell;
  std::string metric;
  std::uint64_t seed = 0;
  double value = 0.0;
};

struct Report {
  std::string experiment;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::string version;
  std::vector<std::string> notes;
  std::vector<ReportRow> rows;
  std::vector<RawRow> raw;
};

estimator::Clustering read_cluster_csv(const std::string& path);

/// Oracle reads the assignment file (every query must be covered);
/// UniformRandom chunks a seeded shuffle of the query list into consecutive
/// blocks of cluster_size; Singleton and Global are what they say.
estimator::Clustering cluster_queries(const GroupedDataset& ds, const ClusteringSpec& spec,
                                      std::uint64_t seed);

Report run_impact(const ExperimentConfig& config, int jobs = 1);
Report run_correction(const ExperimentConfig& config, int jobs = 1);
Report run_cluster_ablation(const ExperimentConfig& config, int jobs = 1);
Report run_clustering_accuracy(const ExperimentConfig& config, int jobs = 1);

enum class ReportFormat { Csv, Json };

/// Deterministic bytes for a fixed report; CSV carries the provenance block
/// as leading comment lines, JSON as a provenance object plus raw rows.
void emit_report(const Report& report, const std::string& path, ReportFormat format);
std::string render_report(const Report& report, ReportFormat format);

}  // namespace gbl::runner

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
#include "gbl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gbl/correction.hpp"
#include "gbl/metrics.hpp"
#include "gbl/rng.hpp"
#include "gbl/stats.hpp"
#include "gbl/theory.hpp"
#include "gbl/version.hpp"

namespace gbl::runner {

namespace {

using json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }

int digits_of(std::size_t n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

std::string padded_label(const char* prefix, std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return prefix + s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (bias_grid.empty()) throw std::invalid_argument("config: at least one bias config required");
  for (const auto& b : bias_grid) b.validate();
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  if (metrics_cutoff < 1) throw std::invalid_argument("config: metrics_cutoff must be >= 1");
  if (!(a_star > 0.0 && a_star < 1.0)) throw std::invalid_argument("config: a_star must be in (0,1)");
  estimation_grid.validate();
  if (synthetic) synthetic_spec.validate();
  else if (file_path.empty()) throw std::invalid_argument("config: file dataset needs a path");
}

estimator::Clustering read_cluster_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  estimator::Clustering map;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected query_id,cluster_id");
    std::string q = line.substr(0, comma);
    std::string c = line.substr(comma + 1);
    if (first && q == "query_id") {
      first = false;
      continue;
    }
    first = false;
    map[q] = c;
  }
  return map;
}

estimator::Clustering cluster_queries(const GroupedDataset& ds, const ClusteringSpec& spec,
                                      std::uint64_t seed) {
  estimator::Clustering map;
  switch (spec.kind) {
    case ClusteringKind::Global:
      for (const auto& q : ds.queries) map[q.id] = "c0";
      break;
    case ClusteringKind::Singleton:
      for (const auto& q : ds.queries) map[q.id] = q.id;
      break;
    case ClusteringKind::UniformRandom: {
      if (spec.cluster_size < 1)
        throw std::invalid_argument("cluster_queries: cluster_size must be >= 1");
      std::vector<std::size_t> order(ds.queries.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng = Rng(seed).keyed("clustering");
      rng.shuffle(order);
      const std::size_t size = static_cast<std::size_t>(spec.cluster_size);
      const std::size_t n_clusters = (order.size() + size - 1) / size;
      const int width = digits_of(n_clusters == 0 ? 0 : n_clusters - 1);
      for (std::size_t i = 0; i < order.size(); ++i)
        map[ds.queries[order[i]].id] = padded_label("c", i / size, width);
      break;
    }
    case ClusteringKind::Oracle: {
      auto oracle = read_cluster_csv(spec.oracle_path);
      std::vector<std::string> missing;
      for (const auto& q : ds.queries) {
        auto it = oracle.find(q.id);
        if (it == oracle.end())
          missing.push_back(q.id);
        else
          map[q.id] = it->second;
      }
      if (!missing.empty()) {
        std::string msg = "cluster_queries: oracle file missing queries:";
        for (const auto& m : missing) msg += " " + m;
        throw std::runtime_error(msg);
      }
      break;
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

namespace {

std::uint64_t seed_offset_from_env() {
  const char* env = std::getenv("GBL_SEED_OFFSET");
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  auto res = std::from_chars(env, env + std::string_view(env).size(), v);
  if (res.ec != std::errc()) throw std::runtime_error("GBL_SEED_OFFSET must be an unsigned integer");
  return v;
}

RelevanceDistribution parse_relevance(const json& j) {
  RelevanceDistribution d;
  std::string kind = j.value("kind", "uniform");
  if (kind == "uniform") {
    d.kind = RelevanceKind::UniformUnit;
  } else if (kind == "bernoulli") {
    d.kind = RelevanceKind::Bernoulli;
    d.bernoulli_p = j.value("p", 0.5);
  } else if (kind == "graded") {
    d.kind = RelevanceKind::GradedCategorical;
    auto probs = j.at("grade_probs");
    if (!probs.is_array() || probs.size() != 5)
      throw std::runtime_error("config: grade_probs must be an array of 5 probabilities");
    for (std::size_t i = 0; i < 5; ++i) d.grade_probs[i] = probs[i].get<double>();
  } else {
    throw std::runtime_error("config: unknown relevance kind '" + kind + "'");
  }
  return d;
}

ThresholdRule parse_threshold(const json& j) {
  ThresholdRule r;
  std::string kind = j.value("kind", "mean");
  if (kind == "mean") r.kind = ThresholdKind::Mean;
  else if (kind == "mean_minus_std") r.kind = ThresholdKind::MeanMinusStd;
  else if (kind == "explicit") {
    r.kind = ThresholdKind::Explicit;
    r.value = j.at("value").get<double>();
  } else {
    throw std::runtime_error("config: unknown threshold kind '" + kind + "'");
  }
  return r;
}

BiasConfig parse_bias(const json& j, std::uint64_t offset) {
  BiasConfig b;
  b.modes.clear();
  if (j.contains("modes")) {
    for (const auto& m : j.at("modes"))
      b.modes.push_back({m.at("mean").get<double>(), m.value("weight", 1.0)});
  } else {
    b.modes.push_back({j.at("beta").get<double>(), 1.0});
  }
  b.sigma_beta = j.value("sigma_beta", 0.0);
  if (j.contains("clamp")) {
    b.clamp_lo = j.at("clamp").at(0).get<double>();
    b.clamp_hi = j.at("clamp").at(1).get<double>();
  }
  b.tiebreak_epsilon = j.value("tiebreak_epsilon", 0.0);
  b.seed = j.value("seed", std::uint64_t{0}) + offset;
  return b;
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
  const std::uint64_t offset = seed_offset_from_env();
  json j = json::parse(text);
  ExperimentConfig cfg;

  const auto& ds = j.at("dataset");
  if (ds.contains("synthetic")) {
    cfg.synthetic = true;
    const auto& s = ds.at("synthetic");
    cfg.synthetic_spec.num_queries = s.at("num_queries").get<int>();
    cfg.synthetic_spec.items_per_query = s.at("items_per_query").get<int>();
    cfg.synthetic_spec.affected_fraction = s.value("affected_fraction", 0.5);
    if (s.contains("relevance")) cfg.synthetic_spec.relevance = parse_relevance(s.at("relevance"));
    cfg.synthetic_spec.seed = s.value("seed", std::uint64_t{0}) + offset;
    cfg.synthetic_spec.num_informative_features = s.value("num_informative_features", 0);
  } else if (ds.contains("file")) {
    cfg.synthetic = false;
    const auto& f = ds.at("file");
    cfg.file_path = f.at("path").get<std::string>();
    std::string format = f.value("format", "tabular");
    if (format == "svmlight") cfg.file_format = FileFormat::Svmlight;
    else if (format == "tabular") cfg.file_format = FileFormat::Tabular;
    else throw std::runtime_error("config: unknown file format '" + format + "'");
  } else {
    throw std::runtime_error("config: dataset must contain 'synthetic' or 'file'");
  }

  if (j.contains("sensitive_feature")) cfg.sensitive_feature = j.at("sensitive_feature").get<int>();
  if (j.contains("threshold_rule")) cfg.threshold_rule = parse_threshold(j.at("threshold_rule"));
  cfg.min_retained_fraction = j.value("min_retained_fraction", 0.0);

  for (const auto& b : j.at("bias")) cfg.bias_grid.push_back(parse_bias(b, offset));

  if (j.contains("clustering")) {
    const auto& c = j.at("clustering");
    std::string kind = c.value("kind", "global");
    if (kind == "global") cfg.clustering.kind = ClusteringKind::Global;
    else if (kind == "singleton") cfg.clustering.kind = ClusteringKind::Singleton;
    else if (kind == "uniform_random") cfg.clustering.kind = ClusteringKind::UniformRandom;
    else if (kind == "oracle") cfg.clustering.kind = ClusteringKind::Oracle;
    else throw std::runtime_error("config: unknown clustering kind '" + kind + "'");
    cfg.clustering.cluster_size = c.value("cluster_size", 10);
    cfg.clustering.oracle_path = c.value("path", std::string{});
  }
  if (j.contains("cluster_size_grid"))
    cfg.cluster_size_grid = j.at("cluster_size_grid").get<std::vector<int>>();

  std::string corr = j.value("correction", "amortized");
  if (corr == "none") cfg.correction = CorrectionMode::None;
  else if (corr == "per_query") cfg.correction = CorrectionMode::PerQuery;
  else if (corr == "amortized") cfg.correction = CorrectionMode::Amortized;
  else throw std::runtime_error("config: unknown correction mode '" + corr + "'");

  cfg.metrics_cutoff = j.value("metrics_cutoff", 10);
  cfg.a_star = j.value("a_star", 0.5);
  if (j.contains("estimation_grid")) {
    const auto& g = j.at("estimation_grid");
    cfg.estimation_grid.lo = g.value("lo", 0.05);
    cfg.estimation_grid.hi = g.value("hi", 1.0);
    cfg.estimation_grid.step = g.value("step", 0.005);
  }

  for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>() + offset);

  if (j.contains("ltr")) {
    const auto& l = j.at("ltr");
    ltr::TrainConfig t;
    t.learning_rate = l.value("learning_rate", 0.05);
    t.epochs = l.value("epochs", 50);
    t.ndcg_cutoff_for_deltas = l.value("cutoff", 10);
    t.seed = l.value("seed", std::uint64_t{0}) + offset;
    std::string src = l.value("label_source", "true");
    if (src == "true") t.label_source = ltr::LabelSource::True;
    else if (src == "biased") t.label_source = ltr::LabelSource::Biased;
    else if (src == "corrected") t.label_source = ltr::LabelSource::Corrected;
    else throw std::runtime_error("config: unknown label_source '" + src + "'");
    cfg.ltr = t;
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_json(ss.str());
}

SyntheticSpec parse_synthetic_spec_json(const std::string& text) {
  const std::uint64_t offset = seed_offset_from_env();
  json s = json::parse(text);
  if (s.contains("synthetic")) s = s.at("synthetic");
  SyntheticSpec spec;
  spec.num_queries = s.at("num_queries").get<int>();
  spec.items_per_query = s.at("items_per_query").get<int>();
  spec.affected_fraction = s.value("affected_fraction", 0.5);
  if (s.contains("relevance")) spec.relevance = parse_relevance(s.at("relevance"));
  spec.seed = s.value("seed", std::uint64_t{0}) + offset;
  spec.num_informative_features = s.value("num_informative_features", 0);
  spec.validate();
  return spec;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::ostringstream canon;
  canon << cfg.synthetic;
  if (cfg.synthetic) {
    const auto& s = cfg.synthetic_spec;
    canon << '|' << s.num_queries << '|' << s.items_per_query << '|' << fmt(s.affected_fraction)
          << '|' << static_cast<int>(s.relevance.kind) << '|' << fmt(s.relevance.bernoulli_p);
    for (double p : s.relevance.grade_probs) canon << '|' << fmt(p);
    canon << '|' << s.seed << '|' << s.num_informative_features;
  } else {
    canon << '|' << cfg.file_path << '|' << static_cast<int>(cfg.file_format);
  }
  canon << "|sf=" << (cfg.sensitive_feature ? std::to_string(*cfg.sensitive_feature) : "-");
  canon << "|th=" << static_cast<int>(cfg.threshold_rule.kind) << ',' << fmt(cfg.threshold_rule.value);
  for (const auto& b : cfg.bias_grid) {
    canon << "|b:";
    for (const auto& m : b.modes) canon << fmt(m.mean) << '*' << fmt(m.weight) << ';';
    canon << fmt(b.sigma_beta) << ',' << fmt(b.clamp_lo) << ',' << fmt(b.clamp_hi) << ','
          << fmt(b.tiebreak_epsilon) << ',' << b.seed;
  }
  canon << "|cl=" << static_cast<int>(cfg.clustering.kind) << ',' << cfg.clustering.cluster_size << ','
        << cfg.clustering.oracle_path;
  for (int s : cfg.cluster_size_grid) canon << ',' << s;
  canon << "|corr=" << static_cast<int>(cfg.correction);
  canon << "|k=" << cfg.metrics_cutoff << "|a*=" << fmt(cfg.a_star);
  canon << "|grid=" << fmt(cfg.estimation_grid.lo) << ',' << fmt(cfg.estimation_grid.hi) << ','
        << fmt(cfg.estimation_grid.step);
  canon << "|seeds=";
  for (auto s : cfg.seeds) canon << s << ',';
  if (cfg.ltr)
    canon << "|ltr=" << fmt(cfg.ltr->learning_rate) << ',' << cfg.ltr->epochs << ','
          << cfg.ltr->ndcg_cutoff_for_deltas << ',' << cfg.ltr->seed;
  std::uint64_t h = Rng::fnv1a(canon.str());
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

// ---------------------------------------------------------------------------
// Cell evaluation
// ---------------------------------------------------------------------------

namespace {

struct QueryMetrics {
  double ndcg = 0.0;
  double ndcg_affected = 0.0;
  double ndcg_nonaffected = 0.0;
  std::optional<double> dtr;
  double eel = 0.0;
  double eel_group = 0.0;
};

QueryMetrics query_metrics(const Query& q, const std::vector<double>& scores, int k, double a_star) {
  const std::size_t n = q.items.size();
  std::vector<double> gains(n);
  std::vector<std::string> ids(n);
  std::vector<Group> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    gains[i] = q.items[i].relevance;
    ids[i] = q.items[i].id;
    groups[i] = q.items[i].group;
  }
  QueryMetrics m;
  auto ranking = metrics::sort_by_score(ids, scores);
  m.ndcg = metrics::ndcg_at_k(ranking, gains, k);
  m.ndcg_affected = metrics::group_restricted_ndcg(ranking, gains, groups, Group::Affected, k);
  m.ndcg_nonaffected = metrics::group_restricted_ndcg(ranking, gains, groups, Group::NonAffected, k);
  auto target_true = metrics::target_exposure({gains, a_star}, ids, groups);
  auto target_obs = metrics::target_exposure({scores, a_star}, ids, groups);
  auto eel = metrics::eel_distance(target_true, target_obs);
  m.eel = eel.per_item_l2;
  m.eel_group = eel.group_level;
  try {
    m.dtr = metrics::dtr_ratio(target_true, target_obs);
  } catch (const std::invalid_argument&) {
    // zero merit exposure in a divisor group: ratio undefined for this query
  }
  return m;
}

struct CellResult {
  std::vector<QueryMetrics> biased;
  std::vector<QueryMetrics> corrected;  // empty when correction is off
  std::vector<double> beta_hats;        // per cluster
  double ltr_ndcg_true = 0.0, ltr_ndcg_biased = 0.0, ltr_ndcg_corrected = 0.0;
  bool has_ltr = false;
};

GroupedDataset prepare_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  GroupedDataset ds;
  if (cfg.synthetic) {
    SyntheticSpec spec = cfg.synthetic_spec;
    spec.seed = Rng::mix(spec.seed, Rng::mix(seed, Rng::fnv1a("dataset")));
    ds = synthesize_dataset(spec);
  } else {
    ds = cfg.file_format == FileFormat::Svmlight ? parse_svmlight_file(cfg.file_path)
                                                 : parse_tabular_csv_file(cfg.file_path);
  }
  if (cfg.sensitive_feature) ds = assign_groups(ds, *cfg.sensitive_feature, cfg.threshold_rule);
  return filter_queries(ds, cfg.min_retained_fraction).dataset;
}

ltr::LabelTable labels_from_values(const std::vector<std::vector<double>>& values) { return values; }

double ltr_test_ndcg(const ExperimentConfig& cfg, const GroupedDataset& train,
                     const ltr::LabelTable& labels, const GroupedDataset& test) {
  ltr::TrainConfig tc = *cfg.ltr;
  auto trained = ltr::train(train, labels, tc);
  return ltr::evaluate(trained.scorer, test, cfg.metrics_cutoff, cfg.a_star).ndcg;
}

CellResult evaluate_cell(const ExperimentConfig& cfg, const BiasConfig& bias, std::uint64_t seed,
                         CorrectionMode correction, const ClusteringSpec& clustering_spec) {
  CellResult cell;
  GroupedDataset ds = prepare_dataset(cfg, seed);

  BiasConfig b = bias.with_seed(Rng::mix(bias.seed, Rng::mix(seed, Rng::fnv1a("bias"))));
  AttractivenessTable table = simulate_attractiveness(ds, b);

  cell.biased.reserve(ds.queries.size());
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi)
    cell.biased.push_back(
        query_metrics(ds.queries[qi], table.queries[qi].values, cfg.metrics_cutoff, cfg.a_star));

  correction::CorrectedLabels corrected;
  if (correction != CorrectionMode::None) {
    ClusteringSpec cspec = clustering_spec;
    if (correction == CorrectionMode::PerQuery) cspec.kind = ClusteringKind::Singleton;
    auto clustering = cluster_queries(ds, cspec, Rng::mix(seed, Rng::fnv1a("clustering")));
    auto pools = estimator::build_pools(ds, table, clustering);
    auto estimates = estimator::estimate_all(pools.pools, cfg.estimation_grid);
    corrected = correction::correct_scores(table, ds, estimates, clustering, cfg.estimation_grid);
    for (const auto& [cid, est] : estimates.by_cluster) cell.beta_hats.push_back(est.beta_hat);
    cell.corrected.reserve(ds.queries.size());
    for (std::size_t qi = 0; qi < ds.queries.size(); ++qi)
      cell.corrected.push_back(
          query_metrics(ds.queries[qi], corrected.queries[qi].values, cfg.metrics_cutoff, cfg.a_star));
  }

  if (cfg.ltr && cfg.synthetic && cfg.synthetic_spec.num_informative_features > 0) {
    SyntheticSpec test_spec = cfg.synthetic_spec;
    test_spec.num_queries = std::max(1, cfg.synthetic_spec.num_queries / 4);
    test_spec.seed = Rng::mix(cfg.synthetic_spec.seed, Rng::mix(seed, Rng::fnv1a("ltr-test")));
    GroupedDataset test = synthesize_dataset(test_spec);

    cell.has_ltr = true;
    cell.ltr_ndcg_true = ltr_test_ndcg(cfg, ds, ltr::true_labels(ds), test);
    std::vector<std::vector<double>> biased_labels, corrected_labels;
    for (const auto& qa : table.queries) biased_labels.push_back(qa.values);
    cell.ltr_ndcg_biased = ltr_test_ndcg(cfg, ds, labels_from_values(biased_labels), test);
    if (correction != CorrectionMode::None) {
      for (const auto& cq : corrected.queries) corrected_labels.push_back(cq.values);
      cell.ltr_ndcg_corrected = ltr_test_ndcg(cfg, ds, labels_from_values(corrected_labels), test);
    }
  }
  return cell;
}

std::string bias_label(const BiasConfig& b) {
  std::string betas;
  for (const auto& m : b.modes) {
    if (!betas.empty()) betas += '+';
    betas += fmt(m.mean);
  }
  return betas;
}

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  const int n_threads = std::min<int>(jobs, static_cast<int>(count));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&, t] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct Aggregator {
  Report* report;
  Cell cell;

  // Per-seed means keyed by metric, in insertion order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> values;

  void add(const std::string& metric, std::uint64_t seed, double value) {
    auto it = values.find(metric);
    if (it == values.end()) {
      order.push_back(metric);
      it = values.emplace(metric, std::vector<double>{}).first;
    }
    it->second.push_back(value);
    report->raw.push_back({cell, metric, seed, value});
  }

  void flush(const std::map<std::string, double>& p_values = {}) {
    for (const auto& metric : order) {
      const auto& v = values.at(metric);
      ReportRow row;
      row.cell = cell;
      row.metric = metric;
      row.mean = stats::mean(v);
      row.stddev = v.size() > 1 ? stats::stddev(v) : 0.0;
      row.n = static_cast<int>(v.size());
      if (auto it = p_values.find(metric); it != p_values.end()) row.p_value = it->second;
      report->rows.push_back(std::move(row));
    }
  }
};

double mean_of(const std::vector<QueryMetrics>& qs, double QueryMetrics::* field) {
  std::vector<double> v;
  v.reserve(qs.size());
  for (const auto& q : qs) v.push_back(q.*field);
  return stats::mean(v);
}

double mean_dtr(const std::vector<QueryMetrics>& qs) {
  std::vector<double> v;
  for (const auto& q : qs)
    if (q.dtr) v.push_back(*q.dtr);
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::mean(v);
}

void add_variant(Aggregator& agg, std::uint64_t seed, const std::vector<QueryMetrics>& qs,
                 const std::string& suffix, int k) {
  agg.add("ndcg@" + std::to_string(k) + suffix, seed, mean_of(qs, &QueryMetrics::ndcg));
  agg.add("ndcg_affected@" + std::to_string(k) + suffix, seed, mean_of(qs, &QueryMetrics::ndcg_affected));
  agg.add("ndcg_nonaffected@" + std::to_string(k) + suffix, seed,
          mean_of(qs, &QueryMetrics::ndcg_nonaffected));
  agg.add("dtr_ratio" + suffix, seed, mean_dtr(qs));
  agg.add("eel" + suffix, seed, mean_of(qs, &QueryMetrics::eel));
  agg.add("eel_group" + suffix, seed, mean_of(qs, &QueryMetrics::eel_group));
}

Report make_report(const ExperimentConfig& cfg, const std::string& experiment) {
  Report rep;
  rep.experiment = experiment;
  rep.config_hash = config_hash(cfg);
  rep.seeds = cfg.seeds;
  rep.version = kVersion;
  for (const auto& b : cfg.bias_grid)
    rep.notes.push_back("bias beta=" + bias_label(b) + " sigma=" + fmt(b.sigma_beta) + " clamp=[" +
                        fmt(b.clamp_lo) + "," + fmt(b.clamp_hi) + "] tiebreak=" +
                        fmt(b.tiebreak_epsilon));
  rep.notes.push_back("estimation grid lo=" + fmt(cfg.estimation_grid.lo) + " hi=" +
                      fmt(cfg.estimation_grid.hi) + " step=" + fmt(cfg.estimation_grid.step));
  rep.notes.push_back("a_star=" + fmt(cfg.a_star));
  rep.notes.push_back("significance: paired two-sided Wilcoxon signed-rank over per-query values, "
                      "exact for n<=25, normal approximation above");
  return rep;
}

// Paired p-values between corrected and biased per-query metric values,
// pooled across seeds.
std::map<std::string, double> paired_p_values(const std::vector<CellResult>& cells, int k) {
  std::vector<double> nb, nc, db, dc, eb, ec;
  for (const auto& cell : cells) {
    for (std::size_t i = 0; i < cell.biased.size(); ++i) {
      nb.push_back(cell.biased[i].ndcg);
      nc.push_back(cell.corrected[i].ndcg);
      eb.push_back(cell.biased[i].eel);
      ec.push_back(cell.corrected[i].eel);
      if (cell.biased[i].dtr && cell.corrected[i].dtr) {
        db.push_back(*cell.biased[i].dtr);
        dc.push_back(*cell.corrected[i].dtr);
      }
    }
  }
  std::map<std::string, double> p;
  const std::string K = std::to_string(k);
  p["ndcg@" + K + "/corrected"] = stats::wilcoxon_signed_rank(nc, nb).p_value;
  if (!db.empty()) p["dtr_ratio/corrected"] = stats::wilcoxon_signed_rank(dc, db).p_value;
  p["eel/corrected"] = stats::wilcoxon_signed_rank(ec, eb).p_value;
  return p;
}

}  // namespace

Report run_impact(const ExperimentConfig& config, int jobs) {
  config.validate();
  Report rep = make_report(config, "impact");
  const std::size_t n_cells = config.bias_grid.size() * config.seeds.size();
  std::vector<CellResult> cells(n_cells);
  parallel_for(jobs, n_cells, [&](std::size_t i) {
    const auto& bias = config.bias_grid[i / config.seeds.size()];
    std::uint64_t seed = config.seeds[i % config.seeds.size()];
    cells[i] = evaluate_cell(config, bias, seed, CorrectionMode::None, config.clustering);
  });
  for (std::size_t bi = 0; bi < config.bias_grid.size(); ++bi) {
    Aggregator agg{&rep, {{"beta", bias_label(config.bias_grid[bi])},
                          {"sigma_beta", fmt(config.bias_grid[bi].sigma_beta)}}};
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      const auto& cell = cells[bi * config.seeds.size() + si];
      add_variant(agg, config.seeds[si], cell.biased, "", config.metrics_cutoff);
      if (cell.has_ltr) {
        agg.add("ltr_ndcg/full_info", config.seeds[si], cell.ltr_ndcg_true);
        agg.add("ltr_ndcg/biased", config.seeds[si], cell.ltr_ndcg_biased);
      }
    }
    agg.flush();
  }
  return rep;
}

Report run_correction(const ExperimentConfig& config, int jobs) {
  config.validate();
  if (config.correction == CorrectionMode::None)
    throw std::invalid_argument("run_correction: correction mode must be per_query or amortized");
  Report rep = make_report(config, "correction");
  const std::size_t n_cells = config.bias_grid.size() * config.seeds.size();
  std::vector<CellResult> cells(n_cells);
  parallel_for(jobs, n_cells, [&](std::size_t i) {
    const auto& bias = config.bias_grid[i / config.seeds.size()];
    std::uint64_t seed = config.seeds[i % config.seeds.size()];
    cells[i] = evaluate_cell(config, bias, seed, config.correction, config.clustering);
  });
  for (std::size_t bi = 0; bi < config.bias_grid.size(); ++bi) {
    Aggregator agg{&rep, {{"beta", bias_label(config.bias_grid[bi])},
                          {"sigma_beta", fmt(config.bias_grid[bi].sigma_beta)}}};
    std::vector<CellResult> bias_cells;
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      const auto& cell = cells[bi * config.seeds.size() + si];
      bias_cells.push_back(cell);
      std::uint64_t seed = config.seeds[si];
      add_variant(agg, seed, cell.biased, "/biased", config.metrics_cutoff);
      add_variant(agg, seed, cell.corrected, "/corrected", config.metrics_cutoff);
      agg.add("beta_hat_mean", seed,
                cell.beta_hats.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : stats::mean(cell.beta_hats));
      agg.add("beta_hat_std", seed, cell.beta_hats.size() > 1 ? stats::stddev(cell.beta_hats) : 0.0);
      if (cell.has_ltr) {
        agg.add("ltr_ndcg/full_info", seed, cell.ltr_ndcg_true);
        agg.add("ltr_ndcg/biased", seed, cell.ltr_ndcg_biased);
        agg.add("ltr_ndcg/corrected", seed, cell.ltr_ndcg_corrected);
      }
    }
    agg.flush(paired_p_values(bias_cells, config.metrics_cutoff));
  }
  return rep;
}

namespace {

Report run_size_sweep(const ExperimentConfig& config, int jobs, const std::string& name) {
  config.validate();
  Report rep = make_report(config, name);
  const std::size_t n_sizes = config.cluster_size_grid.size();
  const std::size_t n_bias = config.bias_grid.size();
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t n_cells = n_sizes * n_bias * n_seeds;
  std::vector<CellResult> cells(n_cells);
  parallel_for(jobs, n_cells, [&](std::size_t i) {
    const std::size_t zi = i / (n_bias * n_seeds);
    const std::size_t bi = (i / n_seeds) % n_bias;
    const std::size_t si = i % n_seeds;
    ClusteringSpec spec;
    spec.kind = ClusteringKind::UniformRandom;
    spec.cluster_size = config.cluster_size_grid[zi];
    cells[i] = evaluate_cell(config, config.bias_grid[bi], config.seeds[si],
                             CorrectionMode::Amortized, spec);
  });
  for (std::size_t zi = 0; zi < n_sizes; ++zi) {
    for (std::size_t bi = 0; bi < n_bias; ++bi) {
      Aggregator agg{&rep, {{"cluster_size", std::to_string(config.cluster_size_grid[zi])},
                            {"beta", bias_label(config.bias_grid[bi])},
                            {"sigma_beta", fmt(config.bias_grid[bi].sigma_beta)}}};
      for (std::size_t si = 0; si < n_seeds; ++si) {
        const auto& cell = cells[zi * n_bias * n_seeds + bi * n_seeds + si];
        std::uint64_t seed = config.seeds[si];
        add_variant(agg, seed, cell.biased, "/biased", config.metrics_cutoff);
        add_variant(agg, seed, cell.corrected, "/corrected", config.metrics_cutoff);
        agg.add("beta_hat_mean", seed,
                cell.beta_hats.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : stats::mean(cell.beta_hats));
        agg.add("beta_hat_std", seed, cell.beta_hats.size() > 1 ? stats::stddev(cell.beta_hats) : 0.0);
      }
      agg.flush();
    }
  }
  return rep;
}

}  // namespace

Report run_cluster_ablation(const ExperimentConfig& config, int jobs) {
  return run_size_sweep(config, jobs, "cluster-ablation");
}

Report run_clustering_accuracy(const ExperimentConfig& config, int jobs) {
  return run_size_sweep(config, jobs, "clustering-accuracy");
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace {

std::string cell_string(const Cell& cell) {
  std::string s;
  for (const auto& [k, v] : cell) {
    if (!s.empty()) s += '|';
    s += k + '=' + v;
  }
  return s;
}

}  // namespace

std::string render_report(const Report& report, ReportFormat format) {
  if (format == ReportFormat::Csv) {
    std::ostringstream out;
    out << "# experiment: " << report.experiment << '\n';
    out << "# version: " << report.version << '\n';
    out << "# config_hash: " << report.config_hash << '\n';
    out << "# seeds:";
    for (auto s : report.seeds) out << ' ' << s;
    out << '\n';
    for (const auto& n : report.notes) out << "# note: " << n << '\n';
    out << "cell,metric,mean,std,n,p_value\n";
    for (const auto& row : report.rows) {
      out << cell_string(row.cell) << ',' << row.metric << ',' << fmt(row.mean) << ','
          << fmt(row.stddev) << ',' << row.n << ',' << (row.p_value ? fmt(*row.p_value) : "") << '\n';
    }
    return out.str();
  }
  json j;
  j["experiment"] = report.experiment;
  j["provenance"] = {{"version", report.version},
                     {"config_hash", report.config_hash},
                     {"seeds", report.seeds},
                     {"notes", report.notes}};
  j["rows"] = json::array();
  for (const auto& row : report.rows) {
    json cell = json::object();
    for (const auto& [k, v] : row.cell) cell[k] = v;
    json r = {{"cell", cell}, {"metric", row.metric}, {"mean", row.mean},
              {"std", row.stddev}, {"n", row.n}};
    if (row.p_value) r["p_value"] = *row.p_value;
    j["rows"].push_back(std::move(r));
  }
  j["raw"] = json::array();
  for (const auto& raw : report.raw) {
    json cell = json::object();
    for (const auto& [k, v] : raw.cell) cell[k] = v;
    j["raw"].push_back(
        {{"cell", cell}, {"metric", raw.metric}, {"seed", raw.seed}, {"value", raw.value}});
  }
  return j.dump(2) + "\n";
}

void emit_report(const Report& report, const std::string& path, ReportFormat format) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << render_report(report, format);
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace gbl::runner

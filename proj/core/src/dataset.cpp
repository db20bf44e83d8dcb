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
#include "gbl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "gbl/rng.hpp"

namespace gbl {

const char* to_string(Group g) {
  switch (g) {
    case Group::Affected: return "affected";
    case Group::NonAffected: return "nonaffected";
    default: return "unassigned";
  }
}

Group group_from_string(const std::string& s) {
  if (s == "affected") return Group::Affected;
  if (s == "nonaffected") return Group::NonAffected;
  if (s.empty() || s == "unassigned") return Group::Unassigned;
  throw ParseError("unknown group label: '" + s + "'");
}

double Item::feature(int fid) const {
  auto it = std::lower_bound(features.begin(), features.end(), fid,
                             [](const auto& p, int f) { return p.first < f; });
  if (it != features.end() && it->first == fid) return it->second;
  return 0.0;
}

std::size_t Query::count(Group g) const {
  std::size_t n = 0;
  for (const auto& it : items) n += (it.group == g);
  return n;
}

std::size_t GroupedDataset::total_items() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.items.size();
  return n;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw ParseError("line " + std::to_string(line_no) + ": " + what);
}

bool parse_number(std::string_view tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

}  // namespace

GroupedDataset parse_svmlight(std::istream& in) {
  GroupedDataset ds;
  std::map<std::string, std::size_t> index;  // qid -> position in ds.queries
  std::string line;
  std::size_t line_no = 0;
  bool saw_line = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // whitespace-only line
    saw_line = true;

    double relevance = 0.0;
    bool integral = tok.find_first_of(".eE") == std::string::npos;
    if (integral) {
      double g;
      if (!parse_number(tok, g) || g < 0 || g > 4 || g != std::floor(g))
        parse_fail(line_no, "bad grade label '" + tok + "'");
      relevance = g / 4.0;
    } else {
      if (!parse_number(tok, relevance) || relevance < 0.0 || relevance > 1.0)
        parse_fail(line_no, "bad real label '" + tok + "'");
    }

    if (!(ls >> tok) || tok.rfind("qid:", 0) != 0 || tok.size() == 4)
      parse_fail(line_no, "expected qid:<id>");
    std::string qid = tok.substr(4);

    Item item;
    item.relevance = relevance;
    int prev_fid = -1;
    while (ls >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        parse_fail(line_no, "bad feature token '" + tok + "'");
      double fid_d, val;
      if (!parse_number(std::string_view(tok).substr(0, colon), fid_d) || fid_d != std::floor(fid_d))
        parse_fail(line_no, "bad feature id in '" + tok + "'");
      int fid = static_cast<int>(fid_d);
      if (fid <= prev_fid)
        parse_fail(line_no, "feature ids must be strictly increasing at '" + tok + "'");
      if (!parse_number(std::string_view(tok).substr(colon + 1), val))
        parse_fail(line_no, "bad feature value in '" + tok + "'");
      item.features.emplace_back(fid, val);
      prev_fid = fid;
    }

    auto [it, inserted] = index.try_emplace(qid, ds.queries.size());
    if (inserted) {
      Query q;
      q.id = qid;
      ds.queries.push_back(std::move(q));
    }
    auto& q = ds.queries[it->second];
    item.id = "d" + std::to_string(q.items.size());
    q.items.push_back(std::move(item));
  }
  if (!saw_line) throw ParseError("empty stream");
  return ds;
}

GroupedDataset parse_svmlight_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return parse_svmlight(f);
}

void serialize_svmlight(const GroupedDataset& ds, std::ostream& out) {
  for (const auto& q : ds.queries) {
    for (const auto& it : q.items) {
      out << fmt_double(it.relevance) << " qid:" << q.id;
      for (const auto& [fid, val] : it.features) out << ' ' << fid << ':' << fmt_double(val);
      out << '\n';
    }
  }
}

GroupedDataset assign_groups(const GroupedDataset& ds, int feature_id, ThresholdRule rule) {
  if (ds.queries.empty()) throw std::invalid_argument("assign_groups: empty dataset");
  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  for (const auto& q : ds.queries) {
    for (const auto& it : q.items) {
      bool has = std::any_of(it.features.begin(), it.features.end(),
                             [&](const auto& p) { return p.first == feature_id; });
      if (!has)
        throw std::invalid_argument("assign_groups: item '" + it.id + "' in query '" + q.id +
                                    "' lacks feature " + std::to_string(feature_id));
      double v = it.feature(feature_id);
      sum += v;
      sumsq += v * v;
      ++n;
    }
  }
  double mean = sum / static_cast<double>(n);
  double var = sumsq / static_cast<double>(n) - mean * mean;
  if (var < 0) var = 0;  // rounding guard

  GroupedDataset out = ds;
  out.group_feature = feature_id;
  out.threshold_rule = rule;
  out.degenerate_threshold = false;
  switch (rule.kind) {
    case ThresholdKind::Mean: out.applied_threshold = mean; break;
    case ThresholdKind::MeanMinusStd:
      if (var == 0.0) {
        out.applied_threshold = mean;
        out.degenerate_threshold = true;
      } else {
        out.applied_threshold = mean - std::sqrt(var);
      }
      break;
    case ThresholdKind::Explicit: out.applied_threshold = rule.value; break;
  }
  std::size_t affected = 0;
  for (auto& q : out.queries) {
    for (auto& it : q.items) {
      it.group = it.feature(feature_id) < out.applied_threshold ? Group::Affected : Group::NonAffected;
      affected += it.group == Group::Affected;
    }
  }
  if (affected == 0 || affected == n) out.degenerate_threshold = true;  // single-group split
  return out;
}

FilterResult filter_queries(const GroupedDataset& ds, double min_fraction, const QueryPredicate& extra) {
  FilterResult res;
  res.dataset = ds;
  res.dataset.queries.clear();
  for (const auto& q : ds.queries) {
    for (const auto& it : q.items)
      if (it.group == Group::Unassigned)
        throw std::invalid_argument("filter_queries: query '" + q.id + "' has unassigned groups");
    if (q.count(Group::Affected) == 0 || q.count(Group::NonAffected) == 0) continue;
    if (extra && !extra(q)) continue;
    res.dataset.queries.push_back(q);
  }
  if (res.dataset.queries.empty()) throw std::runtime_error("filter_queries: no queries retained");
  res.retained_fraction =
      static_cast<double>(res.dataset.queries.size()) / static_cast<double>(ds.queries.size());
  res.meets_min_fraction = res.retained_fraction >= min_fraction;
  return res;
}

namespace predicates {
QueryPredicate score_spread(double threshold) {
  return [threshold](const Query& q) {
    bool above = false, below = false;
    for (const auto& it : q.items) {
      above |= it.relevance > threshold;
      below |= it.relevance < threshold;
    }
    return above && below;
  };
}
}  // namespace predicates

double RelevanceDistribution::quantile(double u) const {
  switch (kind) {
    case RelevanceKind::UniformUnit: return u;
    case RelevanceKind::Bernoulli: return u < 1.0 - bernoulli_p ? 0.0 : 1.0;
    case RelevanceKind::GradedCategorical: {
      double cum = 0.0;
      for (int g = 0; g < 5; ++g) {
        cum += grade_probs[static_cast<std::size_t>(g)];
        if (u < cum) return g / 4.0;
      }
      return 1.0;
    }
  }
  return u;
}

void RelevanceDistribution::validate() const {
  if (kind == RelevanceKind::Bernoulli && (bernoulli_p < 0.0 || bernoulli_p > 1.0))
    throw std::invalid_argument("Bernoulli p must be in [0,1]");
  if (kind == RelevanceKind::GradedCategorical) {
    double s = 0.0;
    for (double p : grade_probs) {
      if (p < 0.0) throw std::invalid_argument("grade probabilities must be nonnegative");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("grade probabilities must sum to 1");
  }
}

void SyntheticSpec::validate() const {
  if (num_queries <= 0) throw std::invalid_argument("num_queries must be positive");
  if (items_per_query <= 0) throw std::invalid_argument("items_per_query must be positive");
  if (affected_fraction <= 0.0 || affected_fraction >= 1.0)
    throw std::invalid_argument("affected_fraction must be in (0,1)");
  if (std::lround(affected_fraction * items_per_query) < 1)
    throw std::invalid_argument("affected_fraction * items_per_query must round to >= 1");
  if (num_informative_features < 0) throw std::invalid_argument("num_informative_features < 0");
  relevance.validate();
}

namespace {

std::string padded(const char* prefix, int value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return prefix + s;
}

int digits(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

// Standard normal CDF.
double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

GroupedDataset synthesize_dataset(const SyntheticSpec& spec) {
  spec.validate();
  GroupedDataset ds;
  const int F = spec.num_informative_features;
  ds.group_feature = F > 0 ? spec.sensitive_feature_id() : -1;
  ds.threshold_rule = {ThresholdKind::Explicit, 0.5};
  ds.applied_threshold = 0.5;

  Rng root(spec.seed);
  std::vector<double> weights(static_cast<std::size_t>(F));
  if (F > 0) {
    Rng wrng = root.keyed("feature-weights");
    for (auto& w : weights) w = wrng.uniform(0.5, 1.5);
  }
  double wsumsq = 0.0;
  for (double w : weights) wsumsq += w * w;
  const double z_scale = F > 0 ? std::sqrt(wsumsq / 12.0) : 1.0;

  const int n_aff = static_cast<int>(std::lround(spec.affected_fraction * spec.items_per_query));
  const int qw = digits(spec.num_queries - 1);
  const int iw = digits(spec.items_per_query - 1);

  ds.queries.reserve(static_cast<std::size_t>(spec.num_queries));
  for (int qi = 0; qi < spec.num_queries; ++qi) {
    Query q;
    q.id = padded("q", qi, qw);
    Rng qrng = root.keyed("query").keyed(static_cast<std::uint64_t>(qi));

    std::vector<Group> groups(static_cast<std::size_t>(spec.items_per_query), Group::NonAffected);
    for (int i = 0; i < n_aff; ++i) groups[static_cast<std::size_t>(i)] = Group::Affected;
    Rng grng = qrng.keyed("groups");
    grng.shuffle(groups);

    q.items.reserve(static_cast<std::size_t>(spec.items_per_query));
    for (int ii = 0; ii < spec.items_per_query; ++ii) {
      Item item;
      item.id = padded("d", ii, iw);
      item.group = groups[static_cast<std::size_t>(ii)];
      Rng irng = qrng.keyed("item").keyed(static_cast<std::uint64_t>(ii));
      double u;
      if (F > 0) {
        double z = 0.0;
        for (int f = 0; f < F; ++f) {
          double x = irng.next_double();
          item.features.emplace_back(f + 1, x);
          z += weights[static_cast<std::size_t>(f)] * (x - 0.5);
        }
        u = phi(z / z_scale);
        double sens = item.group == Group::Affected ? irng.uniform(0.0, 0.5) : irng.uniform(0.5, 1.0);
        item.features.emplace_back(spec.sensitive_feature_id(), sens);
      } else {
        u = irng.next_double();
      }
      item.relevance = spec.relevance.quantile(u);
      q.items.push_back(std::move(item));
    }
    ds.queries.push_back(std::move(q));
  }
  return ds;
}

void write_tabular_csv(const GroupedDataset& ds, std::ostream& out) {
  std::vector<int> fids;
  for (const auto& q : ds.queries)
    for (const auto& it : q.items)
      for (const auto& [fid, _] : it.features)
        if (std::find(fids.begin(), fids.end(), fid) == fids.end()) fids.push_back(fid);
  std::sort(fids.begin(), fids.end());

  out << "query_id,item_id,relevance,group,cluster_id";
  for (int fid : fids) out << ",f" << fid;
  out << '\n';
  for (const auto& q : ds.queries) {
    for (const auto& it : q.items) {
      out << q.id << ',' << it.id << ',' << fmt_double(it.relevance) << ',' << to_string(it.group)
          << ',' << q.cluster;
      for (int fid : fids) out << ',' << fmt_double(it.feature(fid));
      out << '\n';
    }
  }
}

void write_tabular_csv_file(const GroupedDataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_tabular_csv(ds, f);
}

GroupedDataset parse_tabular_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty stream");
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) header.push_back(col);
  }
  auto col_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_q = col_index("query_id");
  const std::size_t c_i = col_index("item_id");
  const std::size_t c_r = col_index("relevance");
  const std::size_t c_g = col_index("group");
  const std::size_t c_c = col_index("cluster_id");
  std::vector<std::pair<std::size_t, int>> feat_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].size() > 1 && header[i][0] == 'f') {
      double fid;
      if (parse_number(std::string_view(header[i]).substr(1), fid) && fid == std::floor(fid))
        feat_cols.emplace_back(i, static_cast<int>(fid));
    }
  }

  GroupedDataset ds;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    while (cols.size() < header.size()) cols.emplace_back();  // trailing empties
    if (cols.size() != header.size()) parse_fail(line_no, "wrong column count");

    Item item;
    item.id = cols[c_i];
    if (!parse_number(cols[c_r], item.relevance) || item.relevance < 0 || item.relevance > 1)
      parse_fail(line_no, "bad relevance '" + cols[c_r] + "'");
    item.group = group_from_string(cols[c_g]);
    for (const auto& [ci, fid] : feat_cols) {
      double v;
      if (!parse_number(cols[ci], v)) parse_fail(line_no, "bad feature value '" + cols[ci] + "'");
      item.features.emplace_back(fid, v);
    }

    auto [it, inserted] = index.try_emplace(cols[c_q], ds.queries.size());
    if (inserted) {
      Query q;
      q.id = cols[c_q];
      q.cluster = cols[c_c];
      ds.queries.push_back(std::move(q));
    }
    ds.queries[it->second].items.push_back(std::move(item));
  }
  if (ds.queries.empty()) throw ParseError("no data rows");
  return ds;
}

GroupedDataset parse_tabular_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return parse_tabular_csv(f);
}

}  // namespace gbl

#include <doctest.h>

#include <sstream>

#include "gbl/dataset.hpp"
#include "gbl/estimator.hpp"
#include "gbl/rng.hpp"

using namespace gbl;

TEST_SUITE_BEGIN("dataset");

TEST_CASE("parse_svmlight maps integer grades to g/4") {
  std::istringstream in("2 qid:1 5:0.3\n0 qid:1 5:0.9\n");
  auto ds = parse_svmlight(in);
  REQUIRE(ds.queries.size() == 1);
  REQUIRE(ds.queries[0].items.size() == 2);
  CHECK(ds.queries[0].items[0].relevance == 0.5);
  CHECK(ds.queries[0].items[1].relevance == 0.0);
  CHECK(ds.queries[0].items[0].feature(5) == 0.3);
}

TEST_CASE("parse_svmlight maps max grade to 1") {
  std::istringstream in("4 qid:7 1:1.0\n");
  auto ds = parse_svmlight(in);
  REQUIRE(ds.queries.size() == 1);
  REQUIRE(ds.queries[0].items.size() == 1);
  CHECK(ds.queries[0].items[0].relevance == 1.0);
}

TEST_CASE("parse_svmlight ten-line fixture, field by field") {
  std::ostringstream fixture;
  // Two qids, five items each, sparse features; absent features read as 0.
  fixture << "0 qid:a 1:0.1 3:0.3\n"
          << "1 qid:a 2:0.2\n"
          << "2 qid:a 1:0.5\n"
          << "3 qid:a 3:0.9 4:1.0\n"
          << "4 qid:a 1:1.0 2:1.0 3:1.0\n"
          << "0.25 qid:b 1:0.0\n"
          << "0.5 qid:b 2:-1.5\n"  // negative feature values are legal
          << "0.75 qid:b 1:2.25\n"
          << "1.0 qid:b 3:0.125 # trailing comment\n"
          << "0.0 qid:b 4:7\n";
  std::istringstream in(fixture.str());
  auto ds = parse_svmlight(in);
  REQUIRE(ds.queries.size() == 2);
  CHECK(ds.queries[0].id == "a");
  CHECK(ds.queries[1].id == "b");
  REQUIRE(ds.queries[0].items.size() == 5);
  REQUIRE(ds.queries[1].items.size() == 5);
  // grades
  CHECK(ds.queries[0].items[0].relevance == 0.0);
  CHECK(ds.queries[0].items[1].relevance == 0.25);
  CHECK(ds.queries[0].items[3].relevance == 0.75);
  // real labels pass through
  CHECK(ds.queries[1].items[2].relevance == 0.75);
  // feature defaults
  CHECK(ds.queries[0].items[0].feature(2) == 0.0);
  CHECK(ds.queries[0].items[1].feature(2) == 0.2);
  CHECK(ds.queries[1].items[1].feature(2) == -1.5);
  CHECK(ds.queries[1].items[4].feature(4) == 7.0);
  CHECK(ds.queries[1].items[4].feature(1) == 0.0);
}

TEST_CASE("parse_svmlight error paths") {
  SUBCASE("malformed line reports line number") {
    std::istringstream in("2 qid:1 5:0.3\nnot-a-label qid:1 1:2\n");
    CHECK_THROWS_WITH_AS(parse_svmlight(in), doctest::Contains("line 2"), ParseError);
  }
  SUBCASE("non-monotone feature ids") {
    std::istringstream in("1 qid:1 5:0.3 5:0.4\n");
    CHECK_THROWS_AS(parse_svmlight(in), ParseError);
    std::istringstream in2("1 qid:1 5:0.3 3:0.4\n");
    CHECK_THROWS_AS(parse_svmlight(in2), ParseError);
  }
  SUBCASE("empty stream") {
    std::istringstream in("");
    CHECK_THROWS_AS(parse_svmlight(in), ParseError);
  }
  SUBCASE("label out of range") {
    std::istringstream in("7 qid:1 1:1\n");
    CHECK_THROWS_AS(parse_svmlight(in), ParseError);
    std::istringstream in2("1.5 qid:1 1:1\n");
    CHECK_THROWS_AS(parse_svmlight(in2), ParseError);
  }
}

namespace {

GroupedDataset single_query_with_feature(const std::vector<double>& values, int fid = 1) {
  GroupedDataset ds;
  Query q;
  q.id = "q0";
  for (std::size_t i = 0; i < values.size(); ++i) {
    Item it;
    it.id = "d" + std::to_string(i);
    it.relevance = 0.5;
    it.features = {{fid, values[i]}};
    q.items.push_back(it);
  }
  ds.queries.push_back(q);
  return ds;
}

}  // namespace

TEST_CASE("assign_groups with Mean threshold") {
  auto ds = single_query_with_feature({0, 0, 10, 10});
  auto grouped = assign_groups(ds, 1, {ThresholdKind::Mean, 0.0});
  CHECK(grouped.applied_threshold == 5.0);
  CHECK(grouped.queries[0].items[0].group == Group::Affected);
  CHECK(grouped.queries[0].items[1].group == Group::Affected);
  CHECK(grouped.queries[0].items[2].group == Group::NonAffected);
  CHECK(grouped.queries[0].items[3].group == Group::NonAffected);
  CHECK_FALSE(grouped.degenerate_threshold);
}

TEST_CASE("assign_groups MeanMinusStd with negative threshold puts everything in one group") {
  // mean 22, population std sqrt(1522) = 39.0128..., threshold negative
  auto ds = single_query_with_feature({1, 2, 3, 4, 100});
  auto grouped = assign_groups(ds, 1, {ThresholdKind::MeanMinusStd, 0.0});
  CHECK(grouped.applied_threshold == doctest::Approx(22.0 - 39.012818406262167).epsilon(1e-12));
  for (const auto& it : grouped.queries[0].items) CHECK(it.group == Group::NonAffected);
  CHECK(grouped.degenerate_threshold);  // single-group outcome is flagged
}

TEST_CASE("assign_groups zero variance falls back to Mean with warning") {
  auto ds = single_query_with_feature({3, 3, 3});
  auto grouped = assign_groups(ds, 1, {ThresholdKind::MeanMinusStd, 0.0});
  CHECK(grouped.applied_threshold == 3.0);
  for (const auto& it : grouped.queries[0].items) CHECK(it.group == Group::NonAffected);
  CHECK(grouped.degenerate_threshold);
}

TEST_CASE("assign_groups missing feature names the item") {
  auto ds = single_query_with_feature({1, 2});
  ds.queries[0].items[1].features.clear();
  CHECK_THROWS_WITH_AS(assign_groups(ds, 1, {ThresholdKind::Mean, 0.0}), doctest::Contains("d1"),
                       std::invalid_argument);
}

TEST_CASE("grouping is threshold-monotone") {
  Rng rng(42);
  auto ds = single_query_with_feature({});
  ds.queries[0].items.clear();
  for (int i = 0; i < 50; ++i) {
    Item it;
    it.id = "d" + std::to_string(i);
    it.features = {{1, rng.uniform(-5, 5)}};
    ds.queries[0].items.push_back(it);
  }
  for (int rep = 0; rep < 20; ++rep) {
    double t1 = rng.uniform(-5, 5);
    double t2 = t1 + rng.uniform(0, 3);  // raising the threshold
    auto g1 = assign_groups(ds, 1, {ThresholdKind::Explicit, t1});
    auto g2 = assign_groups(ds, 1, {ThresholdKind::Explicit, t2});
    for (std::size_t i = 0; i < g1.queries[0].items.size(); ++i) {
      if (g1.queries[0].items[i].group == Group::Affected)
        CHECK(g2.queries[0].items[i].group == Group::Affected);
    }
  }
}

namespace {

GroupedDataset three_query_fixture() {
  GroupedDataset ds;
  for (int qi = 0; qi < 3; ++qi) {
    Query q;
    q.id = "q" + std::to_string(qi);
    for (int i = 0; i < 4; ++i) {
      Item it;
      it.id = "d" + std::to_string(i);
      it.relevance = 0.25 * i;
      it.group = (qi == 1 || i % 2 == 0) ? Group::NonAffected : Group::Affected;
      q.items.push_back(it);
    }
    ds.queries.push_back(q);
  }
  return ds;  // query q1 is all-NonAffected
}

}  // namespace

TEST_CASE("filter_queries removes single-group queries and reports the fraction") {
  auto res = filter_queries(three_query_fixture());
  CHECK(res.dataset.queries.size() == 2);
  CHECK(res.retained_fraction == doctest::Approx(2.0 / 3.0));
  CHECK(res.dataset.queries[0].id == "q0");
  CHECK(res.dataset.queries[1].id == "q2");
}

TEST_CASE("filter_queries is the identity on mixed queries") {
  auto ds = three_query_fixture();
  ds.queries.erase(ds.queries.begin() + 1);
  auto res = filter_queries(ds, 0.95);
  CHECK(res.dataset.queries.size() == 2);
  CHECK(res.retained_fraction == 1.0);
  CHECK(res.meets_min_fraction);
}

TEST_CASE("filter_queries with score-spread predicate matches hand count") {
  GroupedDataset ds;
  // five queries; relevance spreads chosen so exactly two pass the
  // both-groups + spread-around-0.5 filter
  const double rel[5][3] = {{0.2, 0.8, 0.4},   // spread ok
                            {0.6, 0.7, 0.9},   // all above 0.5
                            {0.1, 0.3, 0.2},   // all below 0.5
                            {0.5, 0.5, 0.5},   // nothing strictly above/below
                            {0.9, 0.1, 0.5}};  // spread ok
  for (int qi = 0; qi < 5; ++qi) {
    Query q;
    q.id = "q" + std::to_string(qi);
    for (int i = 0; i < 3; ++i) {
      Item it;
      it.id = "d" + std::to_string(i);
      it.relevance = rel[qi][i];
      it.group = i == 0 ? Group::Affected : Group::NonAffected;
      q.items.push_back(it);
    }
    ds.queries.push_back(q);
  }
  auto res = filter_queries(ds, 0.0, predicates::score_spread(0.5));
  CHECK(res.dataset.queries.size() == 2);
  CHECK(res.retained_fraction == doctest::Approx(0.4));
}

TEST_CASE("filter_queries throws when nothing survives") {
  auto ds = three_query_fixture();
  ds.queries = {ds.queries[1]};  // only the all-NonAffected query
  CHECK_THROWS_AS(filter_queries(ds), std::runtime_error);
}

TEST_CASE("synthesize_dataset with degenerate Bernoulli") {
  SyntheticSpec spec;
  spec.num_queries = 1;
  spec.items_per_query = 4;
  spec.affected_fraction = 0.5;
  spec.relevance.kind = RelevanceKind::Bernoulli;
  spec.relevance.bernoulli_p = 1.0;
  spec.seed = 9;
  auto ds = synthesize_dataset(spec);
  REQUIRE(ds.queries.size() == 1);
  REQUIRE(ds.queries[0].items.size() == 4);
  CHECK(ds.queries[0].count(Group::Affected) == 2);
  CHECK(ds.queries[0].count(Group::NonAffected) == 2);
  for (const auto& it : ds.queries[0].items) CHECK(it.relevance == 1.0);
}

TEST_CASE("synthesize_dataset group relevance means agree under UniformUnit") {
  SyntheticSpec spec;
  spec.num_queries = 1000;
  spec.items_per_query = 20;
  spec.affected_fraction = 0.5;
  spec.seed = 11;
  auto ds = synthesize_dataset(spec);
  double sum_a = 0, sum_n = 0;
  std::size_t cnt_a = 0, cnt_n = 0;
  for (const auto& q : ds.queries) {
    for (const auto& it : q.items) {
      if (it.group == Group::Affected) {
        sum_a += it.relevance;
        ++cnt_a;
      } else {
        sum_n += it.relevance;
        ++cnt_n;
      }
    }
  }
  CHECK(sum_a / cnt_a == doctest::Approx(0.5).epsilon(0.04));
  CHECK(sum_n / cnt_n == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::abs(sum_a / cnt_a - 0.5) < 0.02);
  CHECK(std::abs(sum_n / cnt_n - 0.5) < 0.02);
}

TEST_CASE("synthesize_dataset is deterministic") {
  SyntheticSpec spec;
  spec.num_queries = 20;
  spec.items_per_query = 10;
  spec.affected_fraction = 0.3;
  spec.seed = 77;
  spec.num_informative_features = 3;
  auto a = synthesize_dataset(spec);
  auto b = synthesize_dataset(spec);
  std::ostringstream sa, sb;
  write_tabular_csv(a, sa);
  write_tabular_csv(b, sb);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("synthetic groups pass a two-sample KS check under UniformUnit") {
  SyntheticSpec spec;
  spec.num_queries = 1200;
  spec.items_per_query = 20;
  spec.affected_fraction = 0.5;
  spec.seed = 5;
  auto ds = synthesize_dataset(spec);
  std::vector<double> a, n;
  for (const auto& q : ds.queries)
    for (const auto& it : q.items)
      (it.group == Group::Affected ? a : n).push_back(it.relevance);
  REQUIRE(a.size() >= 10000);
  REQUIRE(n.size() >= 10000);
  CHECK(estimator::ks_statistic(a, n) < 0.05);
}

TEST_CASE("svmlight serialize-then-parse is the identity on datasets") {
  SyntheticSpec spec;
  spec.num_queries = 8;
  spec.items_per_query = 6;
  spec.affected_fraction = 0.5;
  spec.seed = 3;
  spec.num_informative_features = 4;
  auto ds = synthesize_dataset(spec);
  std::ostringstream out;
  serialize_svmlight(ds, out);
  std::istringstream in(out.str());
  auto back = parse_svmlight(in);
  REQUIRE(back.queries.size() == ds.queries.size());
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
    CHECK(back.queries[qi].id == ds.queries[qi].id);
    REQUIRE(back.queries[qi].items.size() == ds.queries[qi].items.size());
    for (std::size_t i = 0; i < ds.queries[qi].items.size(); ++i) {
      CHECK(back.queries[qi].items[i].relevance == ds.queries[qi].items[i].relevance);
      CHECK(back.queries[qi].items[i].features == ds.queries[qi].items[i].features);
    }
  }
}

TEST_CASE("tabular CSV round-trips groups, clusters and features") {
  SyntheticSpec spec;
  spec.num_queries = 5;
  spec.items_per_query = 4;
  spec.affected_fraction = 0.5;
  spec.seed = 21;
  spec.num_informative_features = 2;
  auto ds = synthesize_dataset(spec);
  ds.queries[2].cluster = "c7";
  std::ostringstream out;
  write_tabular_csv(ds, out);
  std::istringstream in(out.str());
  auto back = parse_tabular_csv(in);
  REQUIRE(back.queries.size() == ds.queries.size());
  CHECK(back.queries[2].cluster == "c7");
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi)
    for (std::size_t i = 0; i < ds.queries[qi].items.size(); ++i) {
      CHECK(back.queries[qi].items[i].relevance == ds.queries[qi].items[i].relevance);
      CHECK(back.queries[qi].items[i].group == ds.queries[qi].items[i].group);
      CHECK(back.queries[qi].items[i].feature(1) == ds.queries[qi].items[i].feature(1));
    }
}

TEST_CASE("synthetic sensitive feature reproduces the group split") {
  SyntheticSpec spec;
  spec.num_queries = 50;
  spec.items_per_query = 10;
  spec.affected_fraction = 0.4;
  spec.seed = 13;
  spec.num_informative_features = 5;
  auto ds = synthesize_dataset(spec);
  auto regrouped = assign_groups(ds, spec.sensitive_feature_id(), {ThresholdKind::Explicit, 0.5});
  for (std::size_t qi = 0; qi < ds.queries.size(); ++qi)
    for (std::size_t i = 0; i < ds.queries[qi].items.size(); ++i)
      CHECK(regrouped.queries[qi].items[i].group == ds.queries[qi].items[i].group);
}

TEST_SUITE_END();

#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <vector>

#include "gbl/biassim.hpp"
#include "gbl/rng.hpp"

using namespace gbl;

TEST_SUITE_BEGIN("biassim");

namespace {

GroupedDataset two_group_query(const std::vector<double>& affected_rel,
                               const std::vector<double>& nonaffected_rel) {
  GroupedDataset ds;
  Query q;
  q.id = "q0";
  int i = 0;
  for (double r : affected_rel) {
    Item it;
    it.id = "a" + std::to_string(i++);
    it.relevance = r;
    it.group = Group::Affected;
    q.items.push_back(it);
  }
  i = 0;
  for (double r : nonaffected_rel) {
    Item it;
    it.id = "n" + std::to_string(i++);
    it.relevance = r;
    it.group = Group::NonAffected;
    q.items.push_back(it);
  }
  ds.queries.push_back(q);
  return ds;
}

}  // namespace

TEST_CASE("draw_query_propensity with zero variance returns the mode") {
  BiasConfig cfg;
  cfg.modes = {{0.8, 1.0}};
  cfg.sigma_beta = 0.0;
  for (int i = 0; i < 50; ++i)
    CHECK(draw_query_propensity(cfg, "q" + std::to_string(i)) == 0.8);
}

TEST_CASE("draw_query_propensity sample mean, single mode") {
  BiasConfig cfg;
  cfg.modes = {{0.8, 1.0}};
  cfg.sigma_beta = 0.1;
  cfg.seed = 123;
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += draw_query_propensity(cfg, "q" + std::to_string(i));
  // clipped-mass correction at clamp (0.05, 1.0) is below 0.001 here
  CHECK(std::abs(sum / n - 0.8) < 0.005);
}

TEST_CASE("draw_query_propensity sample mean, two modes") {
  BiasConfig cfg;
  cfg.modes = {{0.6, 0.5}, {0.8, 0.5}};
  cfg.sigma_beta = 0.1;
  cfg.seed = 321;
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += draw_query_propensity(cfg, "m" + std::to_string(i));
  CHECK(std::abs(sum / n - 0.7) < 0.005);
}

TEST_CASE("draw_query_propensity respects the clamp") {
  BiasConfig cfg;
  cfg.modes = {{0.1, 1.0}};
  cfg.sigma_beta = 0.5;
  cfg.clamp_lo = 0.05;
  cfg.clamp_hi = 1.0;
  cfg.seed = 5;
  for (int i = 0; i < 2000; ++i) {
    double b = draw_query_propensity(cfg, "q" + std::to_string(i));
    CHECK(b >= 0.05);
    CHECK(b <= 1.0);
  }
}

TEST_CASE("simulate_attractiveness applies the multiplicative model") {
  auto ds = two_group_query({1.0, 0.5}, {0.9});
  BiasConfig cfg;
  cfg.modes = {{0.8, 1.0}};
  cfg.sigma_beta = 0.0;
  auto table = simulate_attractiveness(ds, cfg);
  REQUIRE(table.queries.size() == 1);
  CHECK(table.queries[0].beta_q == 0.8);
  CHECK(table.queries[0].values[0] == 0.8);
  CHECK(table.queries[0].values[1] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(table.queries[0].values[2] == 0.9);
}

TEST_CASE("no bias means the table equals relevance") {
  auto ds = two_group_query({0.3, 0.7}, {0.2, 0.9});
  BiasConfig cfg;
  cfg.modes = {{1.0, 1.0}};
  cfg.sigma_beta = 0.0;
  auto table = simulate_attractiveness(ds, cfg);
  for (std::size_t i = 0; i < ds.queries[0].items.size(); ++i)
    CHECK(table.queries[0].values[i] == ds.queries[0].items[i].relevance);
}

TEST_CASE("equal group relevance means attractiveness means scale by beta") {
  // four items, two per group, equal group mean relevance
  auto ds = two_group_query({1.0, 0.4}, {0.9, 0.5});
  BiasConfig cfg;
  cfg.modes = {{0.8, 1.0}};
  cfg.sigma_beta = 0.0;
  auto table = simulate_attractiveness(ds, cfg);
  double mean_a = (table.queries[0].values[0] + table.queries[0].values[1]) / 2;
  double mean_n = (table.queries[0].values[2] + table.queries[0].values[3]) / 2;
  CHECK(mean_a == doctest::Approx(0.8 * mean_n).epsilon(1e-12));
}

TEST_CASE("IPS identity at the model level") {
  auto ds = two_group_query({0.15, 0.25, 0.3, 0.45, 0.6, 0.9}, {0.5});
  BiasConfig cfg;
  cfg.modes = {{0.8, 1.0}};
  cfg.sigma_beta = 0.0;
  auto table = simulate_attractiveness(ds, cfg);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(table.queries[0].values[i] / table.queries[0].beta_q == ds.queries[0].items[i].relevance);
}

TEST_CASE("add_tiebreak_noise with zero epsilon is the identity") {
  auto ds = two_group_query({0.4, 0.6}, {0.5});
  BiasConfig cfg;
  cfg.modes = {{0.7, 1.0}};
  auto table = simulate_attractiveness(ds, cfg);
  auto noised = add_tiebreak_noise(table, ds, 0.0, 99);
  CHECK(noised.queries[0].values == table.queries[0].values);
}

TEST_CASE("add_tiebreak_noise breaks ties within the bound") {
  auto ds = two_group_query({0.8, 0.8}, {0.5});
  BiasConfig cfg;
  cfg.modes = {{1.0, 1.0}};
  auto table = simulate_attractiveness(ds, cfg);
  auto noised = add_tiebreak_noise(table, ds, 1e-6, 7);
  CHECK(noised.queries[0].values[0] != noised.queries[0].values[1]);
  CHECK(std::abs(noised.queries[0].values[0] - 0.8) <= 1e-6);
  CHECK(std::abs(noised.queries[0].values[1] - 0.8) <= 1e-6);
}

TEST_CASE("tie-break noise preserves within-group order of distinct values") {
  Rng rng(2024);
  for (int rep = 0; rep < 30; ++rep) {
    SyntheticSpec spec;
    spec.num_queries = 4;
    spec.items_per_query = 12;
    spec.affected_fraction = 0.5;
    spec.seed = rng.next_u64();
    spec.relevance.kind = rep % 2 == 0 ? RelevanceKind::UniformUnit : RelevanceKind::GradedCategorical;
    auto ds = synthesize_dataset(spec);
    BiasConfig cfg;
    cfg.modes = {{0.8, 1.0}};
    cfg.sigma_beta = 0.05;
    cfg.seed = rng.next_u64();
    auto table = simulate_attractiveness(ds, cfg);
    double eps = rng.uniform(0.0, 0.3);
    auto noised = add_tiebreak_noise(table, ds, eps, rng.next_u64());
    for (std::size_t qi = 0; qi < ds.queries.size(); ++qi) {
      const auto& q = ds.queries[qi];
      for (std::size_t i = 0; i < q.items.size(); ++i) {
        for (std::size_t j = 0; j < q.items.size(); ++j) {
          if (q.items[i].group != q.items[j].group) continue;
          if (table.queries[qi].values[i] > table.queries[qi].values[j])
            CHECK(noised.queries[qi].values[i] > noised.queries[qi].values[j]);
        }
      }
    }
  }
}

TEST_CASE("simulation is deterministic in (dataset, config)") {
  SyntheticSpec spec;
  spec.num_queries = 30;
  spec.items_per_query = 15;
  spec.affected_fraction = 0.5;
  spec.seed = 4;
  auto ds = synthesize_dataset(spec);
  BiasConfig cfg;
  cfg.modes = {{0.6, 0.25}, {0.8, 0.75}};
  cfg.sigma_beta = 0.15;
  cfg.tiebreak_epsilon = 1e-4;
  cfg.seed = 31337;
  auto t1 = simulate_attractiveness(ds, cfg);
  auto t2 = simulate_attractiveness(ds, cfg);
  REQUIRE(t1.queries.size() == t2.queries.size());
  for (std::size_t qi = 0; qi < t1.queries.size(); ++qi) {
    CHECK(t1.queries[qi].beta_q == t2.queries[qi].beta_q);
    CHECK(t1.queries[qi].values == t2.queries[qi].values);
  }
}

TEST_CASE("attractiveness CSV has the documented shape") {
  auto ds = two_group_query({0.5}, {0.25});
  BiasConfig cfg;
  cfg.modes = {{0.8, 1.0}};
  auto table = simulate_attractiveness(ds, cfg);
  std::ostringstream out;
  write_attractiveness_csv(table, ds, out);
  CHECK(out.str() == "query_id,item_id,attractiveness,beta_q\nq0,a0,0.4,0.8\nq0,n0,0.25,0.8\n");
}

TEST_CASE("config validation") {
  BiasConfig cfg;
  cfg.modes = {{0.8, 0.5}, {0.6, 0.4}};  // weights don't sum to 1
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.modes = {{0.8, 1.0}};
  cfg.clamp_lo = 0.0;  // zero floor would unbound the IPS division
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_SUITE_END();

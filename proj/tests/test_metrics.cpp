#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gbl/metrics.hpp"
#include "gbl/rng.hpp"

using namespace gbl;
using namespace gbl::metrics;

TEST_SUITE_BEGIN("metrics");

namespace {

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = "d" + std::string(1, static_cast<char>('a' + i));
  return ids;
}

}  // namespace

TEST_CASE("sort_by_score basics") {
  std::vector<std::string> ids{"a", "b"};
  std::vector<double> scores{0.9, 0.2};
  CHECK(sort_by_score(ids, scores) == std::vector<std::size_t>{0, 1});
  scores = {0.2, 0.9};
  CHECK(sort_by_score(ids, scores) == std::vector<std::size_t>{1, 0});
  scores = {0.5, 0.5};
  CHECK(sort_by_score(ids, scores) == std::vector<std::size_t>{0, 1});  // id tie-break
  std::vector<double> missing{0.5};
  CHECK_THROWS_AS(sort_by_score(ids, missing), std::invalid_argument);
}

TEST_CASE("sort_by_score agrees with a full sort oracle") {
  Rng rng(8);
  for (int rep = 0; rep < 25; ++rep) {
    std::size_t n = 10;
    auto ids = ids_for(n);
    std::vector<double> scores(n);
    for (auto& s : scores) s = rng.uniform(0, 1);
    if (rep % 3 == 0) scores[3] = scores[7];  // inject ties
    auto ranking = sort_by_score(ids, scores);
    std::vector<std::pair<double, std::string>> oracle;
    for (std::size_t i = 0; i < n; ++i) oracle.emplace_back(-scores[i], ids[i]);
    std::sort(oracle.begin(), oracle.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(ids[ranking[i]] == oracle[i].second);
  }
}

TEST_CASE("sort_by_score is invariant under positive rescaling") {
  Rng rng(9);
  auto ids = ids_for(12);
  std::vector<double> scores(12);
  for (auto& s : scores) s = rng.uniform(0, 1);
  auto base = sort_by_score(ids, scores);
  for (double c : {0.25, 3.0, 1e6}) {
    auto scaled = scores;
    for (auto& s : scaled) s *= c;
    CHECK(sort_by_score(ids, scaled) == base);
  }
}

TEST_CASE("dcg_at_k hand arithmetic") {
  std::vector<std::size_t> ranking{0, 1, 2};
  std::vector<double> gains{1, 0, 1};
  CHECK(dcg_at_k(ranking, gains, 3) == doctest::Approx(1.5).epsilon(1e-12));  // 1 + 0 + 1/log2(4)
  gains = {0, 0, 0};
  CHECK(dcg_at_k(ranking, gains, 3) == 0.0);
  gains = {0.7, 0.9, 0.1};
  CHECK(dcg_at_k(ranking, gains, 1) == 0.7);  // single term, log2(2) = 1
}

TEST_CASE("ndcg_at_k") {
  std::vector<std::size_t> ranking{0, 1};
  std::vector<double> gains{1, 0};
  CHECK(ndcg_at_k(ranking, gains, 2) == 1.0);  // already ideal
  gains = {0, 1};
  CHECK(ndcg_at_k(ranking, gains, 2) == doctest::Approx(1.0 / std::log2(3)).epsilon(1e-12));
  gains = {0, 0};
  CHECK(ndcg_at_k(ranking, gains, 2) == 1.0);  // all-zero convention
}

TEST_CASE("ndcg is invariant under permutations below the cutoff") {
  Rng rng(10);
  auto ids = ids_for(15);
  std::vector<double> gains(15), scores(15);
  for (auto& g : gains) g = rng.uniform(0, 1);
  for (auto& s : scores) s = rng.uniform(0, 1);
  auto ranking = sort_by_score(ids, scores);
  const int k = 5;
  double base = ndcg_at_k(ranking, gains, k);
  for (int rep = 0; rep < 10; ++rep) {
    auto shuffled = ranking;
    Rng perm(rng.next_u64());
    std::vector<std::size_t> tail(shuffled.begin() + k, shuffled.end());
    perm.shuffle(tail);
    std::copy(tail.begin(), tail.end(), shuffled.begin() + k);
    CHECK(ndcg_at_k(shuffled, gains, k) == doctest::Approx(base).epsilon(1e-15));
  }
}

TEST_CASE("group_restricted_ndcg") {
  auto ids = ids_for(6);
  std::vector<double> gains{0.9, 0.1, 0.8, 0.0, 0.5, 0.3};
  std::vector<Group> groups{Group::Affected, Group::Affected, Group::NonAffected,
                            Group::NonAffected, Group::Affected, Group::NonAffected};
  std::vector<double> scores{0.6, 0.5, 0.4, 0.9, 0.2, 0.1};
  auto ranking = sort_by_score(ids, scores);

  SUBCASE("all relevant items in the target group equals plain ndcg") {
    std::vector<Group> all_aff(6, Group::Affected);
    CHECK(group_restricted_ndcg(ranking, gains, all_aff, Group::Affected, 4) ==
          ndcg_at_k(ranking, gains, 4));
  }
  SUBCASE("no relevant items in the target group gives 1 by convention") {
    std::vector<double> zero_aff{0, 0, 0.8, 0.1, 0, 0.3};
    CHECK(group_restricted_ndcg(ranking, zero_aff, groups, Group::Affected, 4) == 1.0);
  }
  SUBCASE("mixed instance equals masked recomputation") {
    std::vector<double> masked(6);
    for (std::size_t i = 0; i < 6; ++i) masked[i] = groups[i] == Group::Affected ? gains[i] : 0.0;
    CHECK(group_restricted_ndcg(ranking, gains, groups, Group::Affected, 4) ==
          ndcg_at_k(ranking, masked, 4));
  }
}

TEST_CASE("target_exposure hand arithmetic at n=3, m=2") {
  std::vector<double> util{0.9, 0.8, 0.1};
  auto ids = ids_for(3);
  std::vector<Group> groups{Group::Affected, Group::NonAffected, Group::NonAffected};
  auto te = target_exposure({util, 0.5}, ids, groups);
  const double rel_mean = (1.0 + 1.0 / std::log2(3)) / 2.0;
  CHECK(te.per_item[0] == doctest::Approx(rel_mean).epsilon(1e-12));
  CHECK(te.per_item[1] == doctest::Approx(rel_mean).epsilon(1e-12));
  CHECK(te.per_item[2] == doctest::Approx(0.5).epsilon(1e-12));  // 1/log2(4)
  CHECK(te.affected == doctest::Approx(rel_mean).epsilon(1e-12));
  CHECK(te.nonaffected == doctest::Approx(rel_mean + 0.5).epsilon(1e-12));
}

TEST_CASE("target_exposure with no relevant items spreads uniformly") {
  std::vector<double> util{0.1, 0.2, 0.3, 0.4};
  auto ids = ids_for(4);
  std::vector<Group> groups(4, Group::NonAffected);
  auto te = target_exposure({util, 0.5}, ids, groups);
  double total = 0.0;
  for (int r = 1; r <= 4; ++r) total += exposure_weight(r);
  for (double e : te.per_item) CHECK(e == doctest::Approx(total / 4).epsilon(1e-12));
}

TEST_CASE("target_exposure conserves the exposure budget") {
  Rng rng(77);
  for (int rep = 0; rep < 30; ++rep) {
    std::size_t n = 2 + rng.next_below(18);
    std::vector<double> util(n);
    for (auto& u : util) u = rng.uniform(0, 1);
    std::vector<std::string> ids(n);
    std::vector<Group> groups(n);
    for (std::size_t i = 0; i < n; ++i) {
      ids[i] = "d" + std::to_string(i);
      groups[i] = rng.next_below(2) ? Group::Affected : Group::NonAffected;
    }
    auto te = target_exposure({util, 0.5}, ids, groups);
    double total = 0.0;
    for (std::size_t r = 1; r <= n; ++r) total += exposure_weight(static_cast<int>(r));
    CHECK(std::accumulate(te.per_item.begin(), te.per_item.end(), 0.0) ==
          doctest::Approx(total).epsilon(1e-10));
    CHECK(te.affected + te.nonaffected == doctest::Approx(total).epsilon(1e-10));
  }
}

namespace {

TargetExposure te_of(const std::vector<double>& util, const std::vector<Group>& groups,
                     double a_star = 0.5) {
  std::vector<std::string> ids(util.size());
  for (std::size_t i = 0; i < util.size(); ++i) ids[i] = "d" + std::to_string(i);
  return target_exposure({util, a_star}, ids, groups);
}

}  // namespace

TEST_CASE("eel_distance basics and metric axioms") {
  std::vector<Group> g1{Group::Affected};
  auto a = te_of({0.9}, g1);
  CHECK(eel_distance(a, a).per_item_l2 == 0.0);

  SUBCASE("single item difference") {
    TargetExposure x = a, y = a;
    x.per_item = {1.0};
    y.per_item = {0.4};
    CHECK(eel_distance(x, y).per_item_l2 == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("random 20-item instance matches an independent norm") {
    Rng rng(123);
    std::vector<double> u1(20), u2(20);
    std::vector<Group> groups(20);
    for (std::size_t i = 0; i < 20; ++i) {
      u1[i] = rng.uniform(0, 1);
      u2[i] = rng.uniform(0, 1);
      groups[i] = i % 2 ? Group::Affected : Group::NonAffected;
    }
    auto x = te_of(u1, groups);
    auto y = te_of(u2, groups);
    double ss = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      double d = x.per_item[i] - y.per_item[i];
      ss += d * d;
    }
    CHECK(eel_distance(x, y).per_item_l2 == doctest::Approx(std::sqrt(ss)).epsilon(1e-12));
    CHECK(eel_distance(x, y).group_level ==
          doctest::Approx(2.0 * std::abs(x.nonaffected - y.nonaffected)).epsilon(1e-12));
  }
  SUBCASE("metric axioms on random triples") {
    Rng rng(321);
    std::vector<Group> groups(10);
    for (std::size_t i = 0; i < 10; ++i) groups[i] = i % 2 ? Group::Affected : Group::NonAffected;
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> u1(10), u2(10), u3(10);
      for (std::size_t i = 0; i < 10; ++i) {
        u1[i] = rng.uniform(0, 1);
        u2[i] = rng.uniform(0, 1);
        u3[i] = rng.uniform(0, 1);
      }
      auto x = te_of(u1, groups), y = te_of(u2, groups), z = te_of(u3, groups);
      double dxy = eel_distance(x, y).per_item_l2;
      double dyx = eel_distance(y, x).per_item_l2;
      double dxz = eel_distance(x, z).per_item_l2;
      double dzy = eel_distance(z, y).per_item_l2;
      CHECK(dxy == dyx);
      CHECK(dxy <= dxz + dzy + 1e-12);
      CHECK(eel_distance(x, x).per_item_l2 == 0.0);
    }
  }
  SUBCASE("mismatched item sets throw") {
    TargetExposure other = a;
    other.item_ids = {"zz"};
    CHECK_THROWS_AS(eel_distance(a, other), std::invalid_argument);
  }
}

TEST_CASE("dtr hand arithmetic") {
  CHECK(dtr(2, 1, 2, 1) == 1.0);
  CHECK(dtr(1, 1, 2, 1) == 0.5);
  CHECK(dtr(0.8155, 0.8155, 1, 1) == 1.0);
  CHECK_THROWS_AS(dtr(1, 1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(dtr(1, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("dtr_ratio is 1 when the targets agree") {
  Rng rng(55);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> u(12);
    std::vector<Group> groups(12);
    for (std::size_t i = 0; i < 12; ++i) {
      u[i] = rng.uniform(0, 1);
      groups[i] = i < 6 ? Group::Affected : Group::NonAffected;
    }
    u[0] = 0.9;  // make sure both groups have a relevant item
    u[6] = 0.9;
    auto t = te_of(u, groups);
    CHECK(dtr_ratio(t, t) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dtr_ratio equals the retained fraction on binary instances") {
  // n+_a = 4 affected relevant, k = 3 keep attractiveness above the threshold
  std::vector<double> truth{1, 1, 1, 1, 0, 0, 1, 1, 0};
  std::vector<double> observed{0.9, 0.9, 0.9, 0.2, 0, 0, 1, 1, 0};
  std::vector<Group> groups{Group::Affected,    Group::Affected,    Group::Affected,
                            Group::Affected,    Group::Affected,    Group::Affected,
                            Group::NonAffected, Group::NonAffected, Group::NonAffected};
  auto t = te_of(truth, groups);
  auto o = te_of(observed, groups);
  CHECK(dtr_ratio(t, o) == doctest::Approx(3.0 / 4.0).epsilon(1e-12));
}

TEST_CASE("dtr_ratio agrees with brute-force recomputation") {
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = 6 + rng.next_below(8);
    std::vector<double> truth(n), obs(n);
    std::vector<Group> groups(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.uniform(0, 1);
      obs[i] = rng.uniform(0, 1);
      groups[i] = rng.next_below(2) ? Group::Affected : Group::NonAffected;
    }
    auto t = te_of(truth, groups);
    auto o = te_of(obs, groups);
    auto merit = [&](const TargetExposure& te, Group g) {
      double sum = 0;
      for (std::size_t i = 0; i < te.per_item.size(); ++i)
        if (te.groups[i] == g && te.relevant[i]) sum += te.per_item[i];
      return sum;
    };
    double en = merit(t, Group::NonAffected), ea = merit(t, Group::Affected);
    double on = merit(o, Group::NonAffected), oa = merit(o, Group::Affected);
    if (en == 0 || ea == 0 || on == 0) {
      CHECK_THROWS_AS(dtr_ratio(t, o), std::invalid_argument);
    } else {
      CHECK(dtr_ratio(t, o) == doctest::Approx((oa / on) * (en / ea)).epsilon(1e-12));
    }
  }
}

TEST_CASE("exposure model cutoff zeroes deep ranks") {
  ExposureModel m;
  m.cutoff = 3;
  CHECK(m.weight(3) == exposure_weight(3));
  CHECK(m.weight(4) == 0.0);
}

TEST_SUITE_END();

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "generators.hpp"
#include "spdt/errors.hpp"
#include "spdt/vaccination.hpp"

using namespace spdt;

namespace {

SpdtLink visit_link(NodeId h, NodeId n, Seconds start, Seconds end, std::uint64_t tag) {
  return SpdtLink{h, n, start, end, start, end, tag};
}

// 1 - (1 - beta)^d by repeated multiplication in long double.
long double term(long double beta, std::uint32_t d) {
  long double q = 1;
  for (std::uint32_t i = 0; i < d; ++i) q *= 1 - beta;
  return 1 - q;
}

ScoreTable table_of(const std::vector<double>& values, Strategy s = Strategy::DV) {
  ScoreTable t{s, {}};
  for (NodeId v = 0; v < values.size(); ++v) t.scores.push_back({v, values[v]});
  return t;
}

VisitProfile profile_with(std::vector<std::uint32_t> degrees, std::vector<Seconds> stays = {}) {
  VisitProfile p;
  const auto table = LocationClassTable::standard();
  for (auto d : degrees) ++p.frequency[*table.class_of(d)];
  if (stays.empty()) stays.assign(degrees.size(), 1800);
  p.visit_degrees = std::move(degrees);
  p.visit_stays = std::move(stays);
  return p;
}

}  // namespace

TEST_CASE("location classes") {
  const auto t = LocationClassTable::standard();
  CHECK_FALSE(t.class_of(0).has_value());
  CHECK(t.class_of(1) == 0u);
  CHECK(t.class_of(5) == 0u);
  CHECK(t.class_of(6) == 1u);
  CHECK(t.class_of(10) == 1u);
  CHECK(t.class_of(26) == 3u);
  CHECK(t.class_of(101) == 5u);
  CHECK(t.class_of(100000) == 5u);
  CHECK(t.range(5).high == 500);
  for (std::size_t i = 1; i < kLocationClasses; ++i) CHECK(t.range(i).low == t.range(i - 1).high + 1);
  CHECK_THROWS_AS(LocationClassTable::standard(100), ConfigError);
}

TEST_CASE("class_potential against a high-precision oracle") {
  const auto t = LocationClassTable::standard();
  CHECK(class_potential(0.1, 0) == doctest::Approx(0.2548).epsilon(1e-4));
  for (double beta : {0.01, 0.1, 0.3, 0.9}) {
    double prev = 0.0;
    for (std::size_t i = 0; i < kLocationClasses; ++i) {
      const long double want = (term(beta, t.range(i).low) + term(beta, t.range(i).high)) / 2;
      const double got = class_potential(beta, i);
      CHECK(std::abs(got - static_cast<double>(want)) < 1e-14);
      // Strict growth holds until the top classes saturate in double precision.
      if (want < 1 - 1e-12L) {
        CHECK(got > prev);
        CHECK(got < 1.0);
      }
      CHECK(got >= prev);
      prev = got;
    }
  }
  CHECK(class_potential(1e-12, 0) < 1e-10);
  CHECK_THROWS_AS(class_potential(0.0, 0), DomainError);
  CHECK_THROWS_AS(class_potential(1.0, 0), DomainError);
  CHECK_THROWS_AS(class_potential(0.1, 6), DomainError);
}

TEST_CASE("ranking formula examples") {
  RankingParams params;
  SUBCASE("imv") {
    VisitProfile p;
    CHECK(imv_rank(p, params) == 0.0);
    p.frequency = {2, 0, 1, 0, 0, 0};
    CHECK(imv_rank(p, params) == doctest::Approx(1.381).epsilon(1e-3));
    const double w = imv_rank(p, params);
    for (auto& f : p.frequency) f *= 3;
    CHECK(imv_rank(p, params) == doctest::Approx(3 * w));
  }
  SUBCASE("imve") {
    CHECK(imve_rank(VisitProfile{}, params) == 0.0);
    const VisitProfile p = profile_with({3, 10});
    CHECK(imve_rank(p, params) == doctest::Approx(0.9223).epsilon(1e-4));
    const VisitProfile many = profile_with({1, 500, 40, 7, 120, 3});
    CHECK(imve_rank(many, params) <= 6.0);
  }
  SUBCASE("imvt") {
    CHECK(imvt_beta(0, params) == 0.0);
    CHECK(imvt_beta(1800, params) == doctest::Approx(0.1011).epsilon(1e-3));
    CHECK(imvt_beta(10000000, params) == doctest::Approx(0.16));
    CHECK(imvt_rank(profile_with({5}, {0}), params) == 0.0);
    const VisitProfile p = profile_with({3, 10}, {1800, 3600});
    const double want = term(imvt_beta(1800, params), 3) + term(imvt_beta(3600, params), 10);
    CHECK(imvt_rank(p, params) == doctest::Approx(want));
    params.beta0 = 0.7;
    params.enforce_beta0_bound = false;
    CHECK_THROWS_AS(imvt_rank(profile_with({3}, {100000}), params), DomainError);
    params.enforce_beta0_bound = true;
    CHECK_THROWS_AS(params.validate(), ConfigError);
  }
}

TEST_CASE("property: IMV is bracketed by exact per-visit terms at the class endpoints") {
  Stream rng(51, {});
  const auto table = LocationClassTable::standard();
  RankingParams params;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::uint32_t> degrees;
    const auto visits = 1 + uniform_index(rng, 10);
    for (std::uint64_t i = 0; i < visits; ++i) {
      const auto& r = table.range(uniform_index(rng, kLocationClasses));
      degrees.push_back(bernoulli(rng, 0.5) ? r.low : r.high);
    }
    const VisitProfile p = profile_with(degrees);
    double lo = 0, hi = 0;
    for (auto d : degrees) {
      const auto& r = table.range(*table.class_of(d));
      lo += static_cast<double>(term(params.beta, r.low));
      hi += static_cast<double>(term(params.beta, r.high));
    }
    const double w = imv_rank(p, params);
    CHECK(w >= lo - 1e-12);
    CHECK(w <= hi + 1e-12);
  }
}

TEST_CASE("build_visit_profiles") {
  // Node 0: a visit with 10 neighbors (tag 1), a visit with 3 neighbors and
  // one with 30 (untagged; grouped by host interval).
  std::vector<SpdtLink> links;
  for (NodeId v = 1; v <= 10; ++v) links.push_back(visit_link(0, v, 0, 600, 1));
  for (NodeId v = 1; v <= 3; ++v) links.push_back({0, v, 1000, 2000, 1000, 1500, std::nullopt});
  for (NodeId v = 1; v <= 30; ++v) links.push_back({0, v, 3000, 4000, 3000, 3500, std::nullopt});
  // A repeated neighbor on the same visit counts once.
  links.push_back(visit_link(0, 1, 0, 600, 1));
  const ContactNetwork net(40, 1, Provenance::Synthetic, links);
  const auto profiles = build_visit_profiles(net, {0, 1}, KindSet::all());
  CHECK(profiles[0].frequency == std::array<std::uint32_t, 6>{1, 1, 0, 1, 0, 0});
  CHECK(profiles[0].visit_degrees.size() == 3);
  CHECK(profiles[0].visit_stays.size() == 3);
  CHECK(profiles[5].frequency == std::array<std::uint32_t, 6>{});
  CHECK(profiles[5].visit_degrees.empty());
  CHECK_THROWS_AS(build_visit_profiles(net, {0, 2}, KindSet::all()), DomainError);

  // Only the 10-neighbor visit, with tag: f = [0,1,0,0,0,0].
  const ContactNetwork single(12, 1, Provenance::Synthetic,
                              std::vector<SpdtLink>(links.begin(), links.begin() + 10));
  CHECK(build_visit_profiles(single, {0, 1}, KindSet::all())[0].frequency ==
        std::array<std::uint32_t, 6>{0, 1, 0, 0, 0, 0});
}

TEST_CASE("av_rank and dv_rank examples") {
  SUBCASE("star") {
    std::vector<SpdtLink> links;
    for (NodeId v = 1; v <= 8; ++v) links.push_back(visit_link(0, v, 0, 600, 1));
    const ContactNetwork net(9, 1, Provenance::Synthetic, links);
    for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(av_rank(net, {0, 1}, KindSet::all(), seed)[0] == 8.0);
    const auto dv = dv_rank(net, {0, 1}, KindSet::all());
    CHECK(dv[0] == 8.0);
    CHECK(dv[3] == 1.0);
  }
  SUBCASE("empty network") {
    const ContactNetwork net(5, 1, Provenance::Synthetic, {});
    for (double s : av_rank(net, {0, 1}, KindSet::all(), 1)) CHECK(s == 0.0);
    for (double s : dv_rank(net, {0, 1}, KindSet::all())) CHECK(s == 0.0);
  }
  SUBCASE("two nodes") {
    const ContactNetwork net(2, 1, Provenance::Synthetic, {visit_link(0, 1, 0, 60, 1)});
    CHECK(av_rank(net, {0, 1}, KindSet::all(), 3) == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("hand-built neighbors {1,2,3}") {
    const ContactNetwork net(5, 1, Provenance::Synthetic,
                             {visit_link(0, 1, 0, 60, 1), visit_link(0, 2, 0, 60, 1), visit_link(3, 0, 0, 60, 2)});
    CHECK(dv_rank(net, {0, 1}, KindSet::all())[0] == 3.0);
    CHECK(dv_rank(net, {0, 1}, KindSet::all())[4] == 0.0);
  }
}

TEST_CASE("property: restricting to direct links never raises scores") {
  Stream rng(52, {});
  RankingParams all, direct;
  all.kinds = all.visit_kinds = KindSet::all();
  direct.kinds = direct.visit_kinds = KindSet::direct();
  all.window = direct.window = {0, 3};
  for (int trial = 0; trial < 20; ++trial) {
    const ContactNetwork net = testgen::random_network(rng, 20, 3, 120);
    const auto dv_all = dv_rank(net, all.window, all.kinds), dv_direct = dv_rank(net, direct.window, direct.kinds);
    const auto pa = build_visit_profiles(net, all.window, all.visit_kinds);
    const auto pd = build_visit_profiles(net, direct.window, direct.visit_kinds);
    const AdjacencySnapshot adj_all(net, all.window, all.kinds), adj_direct(net, direct.window, direct.kinds);
    for (NodeId v = 0; v < net.n_nodes(); ++v) {
      CHECK(dv_direct[v] <= dv_all[v]);
      CHECK(imv_rank(pd[v], direct) <= imv_rank(pa[v], all) + 1e-12);
      CHECK(imve_rank(pd[v], direct) <= imve_rank(pa[v], all) + 1e-12);
      CHECK(imvt_rank(pd[v], direct) <= imvt_rank(pa[v], all) + 1e-12);
      // AV: the pool of nameable neighbors shrinks.
      const auto a = adj_all.neighbors(v), d = adj_direct.neighbors(v);
      CHECK(std::includes(a.begin(), a.end(), d.begin(), d.end()));
    }
  }
}

TEST_CASE("sample_observed") {
  std::vector<NodeId> active(1000);
  for (NodeId v = 0; v < 1000; ++v) active[v] = 2 * v;
  CHECK(sample_observed(active, 1.0, 1) == active);
  CHECK(sample_observed(active, 0.0, 1).empty());
  const auto half = sample_observed(active, 0.5, 1);
  CHECK(half.size() == 500);
  CHECK(std::set<NodeId>(half.begin(), half.end()).size() == 500);
  for (NodeId v : half) CHECK(v % 2 == 0);
  CHECK(sample_observed(active, 0.5, 1) == half);
  CHECK_THROWS_AS(sample_observed(active, 1.5, 1), DomainError);
}

TEST_CASE("select_for_vaccination examples") {
  const ScoreTable t = table_of({5, 1, 9, 3, 7, 2, 8, 4, 6, 0});
  CHECK(select_for_vaccination(t, 0, 10, 1).nodes.empty());
  CHECK(select_for_vaccination(t, 30, 10, 1).nodes == std::vector<NodeId>{2, 4, 6});
  CHECK_THROWS_AS(select_for_vaccination(t, -1, 10, 1), DomainError);
  CHECK_THROWS_AS(select_for_vaccination(t, 100.5, 10, 1), DomainError);
  // Quota counts all N nodes; only 10 are scored.
  const Selection big = select_for_vaccination(t, 50, 40, 1);
  CHECK(big.quota == 20);
  CHECK(big.nodes.size() == 10);
  CHECK(big.shortfall == 10);
  // 0.6% of 1000 is 6 despite binary rounding.
  std::vector<double> many(1000);
  for (std::size_t i = 0; i < many.size(); ++i) many[i] = static_cast<double>(i);
  CHECK(select_for_vaccination(table_of(many), 0.6, 1000, 1).nodes.size() == 6);
}

TEST_CASE("ties at the cutoff are broken uniformly") {
  // Two clear winners, then 5 tied nodes for the third slot.
  const ScoreTable t = table_of({10, 9, 1, 1, 1, 1, 1, 0, 0, 0});
  std::array<int, 10> hits{};
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Selection s = select_for_vaccination(t, 30, 10, seed);
    REQUIRE(s.nodes.size() == 3);
    for (NodeId v : s.nodes) ++hits[v];
  }
  CHECK(hits[0] == 10000);
  CHECK(hits[1] == 10000);
  for (NodeId v = 2; v <= 6; ++v) CHECK(std::abs(hits[v] / 10000.0 - 0.2) < 0.03);
  for (NodeId v = 7; v <= 9; ++v) CHECK(hits[v] == 0);
}

TEST_CASE("property: selection size, nesting and scale invariance") {
  Stream rng(53, {});
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::uint32_t>(50 + uniform_index(rng, 500));
    std::vector<double> values(n);
    for (auto& v : values) v = static_cast<double>(uniform_index(rng, 8));  // many ties
    const ScoreTable t = table_of(values);
    ScoreTable scaled = t;
    for (auto& s : scaled.scores) s.score *= 3.5;
    const std::uint64_t seed = rng();
    std::vector<NodeId> previous;
    for (double p = 0; p <= 100; p += 2.5) {
      const Selection s = select_for_vaccination(t, p, n, seed);
      CHECK(s.nodes.size() == static_cast<std::size_t>(std::floor(p * n / 100 + 1e-9)));
      CHECK(std::includes(s.nodes.begin(), s.nodes.end(), previous.begin(), previous.end()));
      CHECK(select_for_vaccination(scaled, p, n, seed).nodes == s.nodes);
      // Every selected node scores at least as high as every unselected one.
      double min_in = INFINITY, max_out = -INFINITY;
      std::vector<bool> in(n, false);
      for (NodeId v : s.nodes) in[v] = true;
      for (NodeId v = 0; v < n; ++v) {
        if (in[v]) min_in = std::min(min_in, values[v]);
        else max_out = std::max(max_out, values[v]);
      }
      if (!s.nodes.empty() && s.nodes.size() < n) CHECK(min_in >= max_out);
      previous = s.nodes;
    }
  }
}

TEST_CASE("score_threshold") {
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[i] = i + 1;
  const ScoreTable t = table_of(hundred);
  CHECK(score_threshold(t, 10, 100) == 90.0);
  CHECK(score_threshold(t, 0, 100) >= 100.0);
  CHECK(score_threshold(t, 100, 100) < 1.0);
  Stream rng(54, {});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> values(1 + uniform_index(rng, 200));
    for (auto& v : values) v = static_cast<double>(uniform_index(rng, 20));
    const auto n = static_cast<std::uint32_t>(values.size() + uniform_index(rng, 100));
    const double p = uniform_real(rng, 0.0, 100.0);
    const double s = score_threshold(table_of(values), p, n);
    const auto above = std::count_if(values.begin(), values.end(), [&](double v) { return v > s; });
    CHECK(static_cast<double>(above) <= p * n / 100 + 1e-9);
    // Smallest such value: lowering s to the next score below admits too many.
    double next = -INFINITY;
    for (double v : values)
      if (v < s) next = std::max(next, v);
    if (std::isfinite(next)) {
      const auto above_next = std::count_if(values.begin(), values.end(), [&](double v) { return v > next; });
      CHECK(static_cast<double>(above_next) > p * n / 100 + 1e-9);
    }
  }
}

TEST_CASE("compute_scores") {
  Stream rng(55, {});
  const ContactNetwork net = testgen::random_network(rng, 30, 7, 200);
  RankingParams params;
  SUBCASE("RV scores every node") {
    const ScoreTable t = compute_scores(net, Strategy::RV, params, 1.0, 9);
    CHECK(t.scores.size() == 30);
    CHECK(compute_scores(net, Strategy::RV, params, 1.0, 9).scores.front().score == t.scores.front().score);
  }
  SUBCASE("other strategies score the observed active nodes") {
    const auto active = active_nodes(net, params.window);
    for (Strategy s : {Strategy::AV, Strategy::DV, Strategy::IMV, Strategy::IMVE, Strategy::IMVT}) {
      CHECK(compute_scores(net, s, params, 1.0, 9).scores.size() == active.size());
      const auto half = compute_scores(net, s, params, 0.5, 9);
      CHECK(half.scores.size() == static_cast<std::size_t>(std::llround(0.5 * active.size())));
      for (const auto& r : half.scores) CHECK(r.score >= 0.0);
    }
  }
  SUBCASE("strategy names and score export") {
    for (Strategy s : {Strategy::RV, Strategy::AV, Strategy::DV, Strategy::IMV, Strategy::IMVE, Strategy::IMVT})
      CHECK(parse_strategy(to_string(s)) == s);
    CHECK_THROWS_AS(parse_strategy("XV"), ConfigError);
    std::ostringstream os;
    write_scores(os, table_of({1.5, 2}), "abc");
    CHECK(os.str() == "node_id,score,strategy,config_hash\n0,1.5,DV,abc\n1,2,DV,abc\n");
  }
}

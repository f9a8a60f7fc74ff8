#include <cmath>
#include <set>

#include "doctest.h"
#include "selfadapt/healthsvc/health.hpp"
#include "support/oracles.hpp"

using namespace selfadapt;
using namespace selfadapt::healthsvc;

namespace {

const std::string kData = std::string(SELFADAPT_SOURCE_DIR) + "/data/health/";

ServiceCatalog zero_catalog() {
  ServiceCatalog c = default_catalog();
  for (auto& ps : c.services) {
    for (Provider& p : ps) p = {0.0, 0.0, 0.0};
  }
  return c;
}

}  // namespace

TEST_CASE("combinations form the full product in a fixed order") {
  const auto combos = enumerate_combinations(default_catalog());
  CHECK(combos.size() == 100);
  CHECK(combos == enumerate_combinations(default_catalog()));
  CHECK(combos.front().provider == std::array<int, 3>{0, 0, 0});
  CHECK(combos[1].provider == std::array<int, 3>{0, 0, 1});
  CHECK(combos.back().provider == std::array<int, 3>{3, 4, 4});
  std::set<std::array<int, 3>> unique;
  for (const auto& c : combos) unique.insert(c.provider);
  CHECK(unique.size() == 100);

  ServiceCatalog one;
  for (auto& ps : one.services) ps = {{0.1, 1.0, 1.0}};
  CHECK(enumerate_combinations(one).size() == 1);
  CHECK_THROWS_AS(enumerate_combinations(ServiceCatalog{}), HealthError);
}

TEST_CASE("catalog and parameter validation") {
  ServiceCatalog c = default_catalog();
  c.services[Drug][0].failure_rate = 1.5;
  CHECK_THROWS_AS(validate(c), HealthError);
  c = default_catalog();
  c.services[Alarm][2].cost = -1.0;
  CHECK_THROWS_AS(validate(c), HealthError);
  WorkflowParams p;
  p.p_emergency = 30;
  CHECK_THROWS_AS(validate(p), HealthError);
  p = {};
  p.p_change_medication = 50;
  CHECK_THROWS_AS(validate(p), HealthError);
  CHECK_THROWS_AS(validate(ServiceCombination{{0, 5, 0}}, default_catalog()), HealthError);
  CHECK_THROWS_AS(validate(ServiceCombination{{-1, 0, 0}}, default_catalog()), HealthError);
}

TEST_CASE("shipped catalog files match the built-in fixtures") {
  const CatalogFile f = load_catalog(kData + "catalog.json");
  CHECK(f.catalog == default_catalog());
  CHECK(f.params == WorkflowParams{});
  const CatalogFile d = load_catalog(kData + "catalog-doubled.json");
  for (int t = 0; t < kServiceTypes; ++t) {
    for (std::size_t i = 0; i < d.catalog.services[t].size(); ++i) {
      CHECK(d.catalog.services[t][i].failure_rate ==
            doctest::Approx(2.0 * default_catalog().services[t][i].failure_rate));
    }
  }
  CHECK(parse_catalog(catalog_to_json(f)).catalog == f.catalog);
  CHECK_THROWS_AS(parse_catalog(R"({"services": {"Drug": []}})"), HealthError);
  CHECK_THROWS_AS(parse_catalog("[1"), HealthError);
}

TEST_CASE("reliable services never fail") {
  const ServiceCatalog c = zero_catalog();
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(run_workflow({{1, 2, 3}}, {}, c, rng).failed);
  const smc::Estimate e = predict_failure_rate({{1, 2, 3}}, {}, c, {0.05, 0.05}, 1);
  CHECK(e.point == 0.0);
  const smc::Estimate t = predict_response_time({{1, 2, 3}}, {}, c, {0.05, 10, 1000}, 1);
  CHECK(t.point == 0.0);
}

TEST_CASE("emergency-only traffic fails at the alarm's rate") {
  ServiceCatalog c = default_catalog();
  c.services[Alarm][2].failure_rate = 0.05;
  const WorkflowParams p{100, 0, 66, 34};
  const smc::Estimate e = predict_failure_rate({{0, 0, 2}}, p, c, {0.01, 0.05}, 5);
  CHECK(std::abs(e.point - 0.05) <= 0.01);
  // deterministic response time: one run tells all
  const smc::Estimate t = predict_response_time({{0, 0, 2}}, p, c, {0.05, 10, 1000}, 5);
  CHECK(t.point == doctest::Approx(c.services[Alarm][2].response_time).epsilon(1e-12));
  CHECK(t.hi - t.lo == doctest::Approx(0.0));
  CHECK(t.runs == 10);
}

TEST_CASE("default combination matches the independence oracle") {
  const ServiceCatalog c = default_catalog();
  const WorkflowParams p;
  const double expected = 0.22 * 0.01 + 0.78 * (1 - (1 - 0.11) * (0.66 * (1 - 0.12) + 0.34 * (1 - 0.01)));
  CHECK(oracle::failure(c, p, {{0, 0, 0}}) == doctest::Approx(expected).epsilon(1e-12));
  const smc::Estimate e = predict_failure_rate({{0, 0, 0}}, p, c, {0.02, 0.05}, 42);
  CHECK(std::abs(e.point - expected) <= 0.02);
}

TEST_CASE("failure estimates agree with the oracle on every combination") {
  const ServiceCatalog c = default_catalog();
  const WorkflowParams p;
  int within = 0;
  for (const ServiceCombination& k : enumerate_combinations(c)) {
    const smc::Estimate e = predict_failure_rate(k, p, c, {0.02, 0.05}, 2024);
    within += std::abs(e.point - oracle::failure(c, p, k)) <= 0.02 ? 1 : 0;
  }
  CHECK(within == 100);
}

TEST_CASE("doubling failure rates raises every estimate") {
  const ServiceCatalog regular = default_catalog();
  const ServiceCatalog doubled = doubled_failure_catalog();
  for (const ServiceCombination& k : enumerate_combinations(regular)) {
    const double a = predict_failure_rate(k, {}, regular, {0.05, 0.05}, 9).point;
    const double b = predict_failure_rate(k, {}, doubled, {0.05, 0.05}, 9).point;
    CHECK(b > a);
  }
}

TEST_CASE("mean estimates of cost and response time") {
  // With three possible path totals a short prefix can look far less
  // spread than the distribution; the minimum run count guards that.
  static_assert(kHealthMeanQuery.min_runs >= 100);
  // A relative standard error of 5 % bounds one standard error, so about
  // two thirds of the estimates land within rsem * mean and all of them
  // within four times that.
  const ServiceCatalog c = default_catalog();
  const WorkflowParams p;
  const qmodels::VerificationParams params{{0.05, 0.05}, kHealthMeanQuery};
  for (const ServiceCombination& k : {ServiceCombination{{0, 0, 0}}, ServiceCombination{{2, 4, 3}}}) {
    const HealthOption o{&c, p, k};
    int close_time = 0, close_cost = 0;
    constexpr int kSeeds = 20;
    for (int seed = 1; seed <= kSeeds; ++seed) {
      const double rt = oracle::response_time(c, p, k);
      const double t = qmodels::verify_quality(response_time_model(), o, params, seed).point;
      CHECK(std::abs(t - rt) <= 4 * 0.05 * rt);
      close_time += std::abs(t - rt) <= 0.05 * rt ? 1 : 0;
      const double cost = oracle::cost(c, p, k);
      const double m = qmodels::verify_quality(cost_model(), o, params, seed).point;
      CHECK(std::abs(m - cost) <= 4 * 0.05 * cost);
      close_cost += std::abs(m - cost) <= 0.05 * cost ? 1 : 0;
    }
    CHECK(close_time >= kSeeds / 2);
    CHECK(close_cost >= kSeeds / 2);
  }
}

TEST_CASE("the goal pipeline picks the analytic optimum") {
  // T sits between two Pareto-adjacent combinations (failure 0.0800 and
  // 0.0895), with room for the interval half-width.
  constexpr double kThreshold = 0.089;
  const ServiceCatalog c = default_catalog();
  const WorkflowParams p;
  const auto combos = enumerate_combinations(c);
  int best = -1;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    if (oracle::failure(c, p, combos[i]) >= kThreshold) continue;
    if (best < 0 || oracle::cost(c, p, combos[i]) < oracle::cost(c, p, combos[static_cast<std::size_t>(best)])) {
      best = static_cast<int>(i);
    }
  }
  REQUIRE(best >= 0);
  REQUIRE(oracle::failure(c, p, combos[static_cast<std::size_t>(best)]) + 0.005 < kThreshold - 0.003);

  HealthSystem sys(c, p, 6);
  HealthLoop loop(default_health_goals(kThreshold), default_registry(), 6, {{0.005, 0.05}, kHealthMeanQuery});
  const HealthRow first = loop.step(sys);
  CHECK(first.analyzed);
  CHECK(first.chosen == best);
  CHECK(sys.combination() == combos[static_cast<std::size_t>(best)]);
  const HealthRow second = loop.step(sys);
  CHECK_FALSE(second.analyzed);

  // with doubled rates nothing meets the threshold
  sys.set_catalog(doubled_failure_catalog());
  const HealthRow third = loop.step(sys);
  CHECK(third.analyzed);
  CHECK(third.failsafe);
  CHECK(sys.combination() == failsafe_combination(doubled_failure_catalog()));
}

TEST_CASE("realized failure rate follows the oracle") {
  const ServiceCatalog c = default_catalog();
  HealthSystem sys(c, {}, 3, 1000);
  sys.apply({{2, 2, 3}});
  double sum = 0.0;
  for (int i = 0; i < 40; ++i) sum += sys.run_cycle().failure_rate;
  CHECK(sum / 40 == doctest::Approx(oracle::failure(c, {}, {{2, 2, 3}})).epsilon(0.05));
}

TEST_CASE("health log format") {
  HealthRow r;
  r.cycle = 3;
  r.analyzed = true;
  r.chosen = 31;
  r.failure_est = 0.08;
  r.cost_est = 13.0;
  r.realized_failure = 0.07;
  r.realized_cost = 12.5;
  CHECK(health_log_row(r) == "3,1,31,0.080000,13.000000,,0,0,0.070000,12.500000");
  CHECK(std::string(kHealthLogHeader).rfind("cycle,analyzed,chosenOptionIndex", 0) == 0);
}

TEST_CASE("response time can join the registry at runtime") {
  HealthRegistry r = default_registry();
  CHECK(r.names() == std::vector<std::string>{"failureRate", "cost"});
  r.add(response_time_model());
  CHECK(r.contains("responseTime"));
  CHECK_THROWS_AS(r.add(response_time_model()), qmodels::RegistryError);
  std::vector<mape::Goal> goals = default_health_goals(0.15);
  goals.push_back({mape::GoalKind::Satisfaction, "responseTime", mape::Comparator::Less, 2.0, mape::Direction::Minimize, 15});
  CHECK_THROWS_AS(HealthLoop(goals, default_registry(), 1), HealthError);
  HealthSystem sys(default_catalog(), {}, 2);
  HealthLoop loop(goals, r, 2);
  const HealthRow row = loop.step(sys);
  REQUIRE(row.response_time_est.has_value());
  CHECK(*row.response_time_est < 2.0 + 0.05 * 2.0);
}

#include <doctest.h>

#include <algorithm>
#include <array>
#include <limits>

#include "cdcp/cvrp.hpp"
#include "cdcp/errors.hpp"
#include "cdcp/oracle.hpp"
#include "test_util.hpp"

using namespace cdcp;

namespace {

CvrpInstance line_instance() {
  CvrpInstance instance;
  instance.id = "line";
  instance.capacity = 10;
  instance.depot = Point(0.0, 0.0);
  instance.customers = {Point(1.0, 0.0), Point(0.5, 0.0)};
  instance.demands = {1, 1};
  return instance;
}

}  // namespace

TEST_CASE("sample_instance respects the distribution and is deterministic") {
  const CvrpInstance a = sample_instance(20, 30, 7);
  CHECK(a.size() == 20);
  CHECK(a.capacity == 30);
  CHECK_NOTHROW(a.check());
  const CvrpInstance b = sample_instance(20, 30, 7);
  CHECK(a.demands == b.demands);
  for (int i = 0; i < 20; ++i) CHECK(a.customers[i] == b.customers[i]);
  CHECK(a.depot == b.depot);

  CHECK_THROWS_AS(sample_instance(0, 30, 1), ParameterError);
  CHECK_THROWS_AS(sample_instance(5, 8, 1), ParameterError);
}

TEST_CASE("sampled demand frequencies approach 1/9") {
  std::array<int, 10> counts{};
  int total = 0;
  for (std::uint64_t seed = 0; total < 10000; ++seed) {
    for (int d : sample_instance(100, 30, seed).demands) {
      ++counts[d];
      ++total;
    }
  }
  for (int d = 1; d <= 9; ++d) CHECK(std::abs(counts[d] / static_cast<double>(total) - 1.0 / 9.0) < 0.02);
}

TEST_CASE("route_cost closed forms and re-summation oracle") {
  CvrpInstance one;
  one.id = "one";
  one.capacity = 10;
  one.customers = {Point(0.3, 0.4)};
  one.demands = {1};
  CHECK(route_cost(one, make_plan(one, {{1}})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(route_cost(one, RoutePlan{}) == 0.0);
  CHECK_THROWS_AS(route_cost(one, RoutePlan{{{2}}, 0.0, "one"}), StructuralError);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const CvrpInstance instance = sample_instance(1 + trial, 30, 100 + trial);
    const RoutePlan plan = testing::random_plan(instance, rng);
    CHECK(std::abs(route_cost(instance, plan) - testing::resummed_cost(instance, plan.routes)) < 1e-12);
  }
}

TEST_CASE("route_cost is invariant under reversing a tour") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const CvrpInstance instance = sample_instance(15, 30, trial);
    RoutePlan plan = testing::random_plan(instance, rng);
    const double before = route_cost(instance, plan);
    auto& tour = plan.routes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(plan.routes.size()) - 1))];
    std::reverse(tour.begin(), tour.end());
    CHECK(std::abs(route_cost(instance, plan) - before) < 1e-12);
  }
}

TEST_CASE("validate reports each broken invariant") {
  const CvrpInstance instance = sample_instance(6, 30, 5);
  Rng rng(1);
  const RoutePlan ok = testing::random_plan(instance, rng);
  CHECK(validate(instance, ok).empty());

  CvrpInstance tight = instance;
  tight.capacity = 10;
  tight.demands = {5, 6, 1, 1, 1, 1};
  const RoutePlan over = make_plan(tight, {{1, 2}, {3, 4, 5, 6}});
  const auto capacity = validate(tight, over);
  REQUIRE(capacity.size() == 1);
  CHECK(capacity[0].kind == ViolationKind::CapacityExceeded);
  CHECK(capacity[0].tour == 0);

  const RoutePlan dup = make_plan(instance, {{1, 2, 3}, {4, 5, 6, 2}});
  const auto dups = validate(instance, dup);
  CHECK(std::any_of(dups.begin(), dups.end(), [](const Violation& v) {
    return v.kind == ViolationKind::Duplicate && v.node == 2;
  }));

  RoutePlan missing = make_plan(instance, {{1, 2, 3, 4, 5}});
  const auto miss = validate(instance, missing);
  REQUIRE(miss.size() == 1);
  CHECK(miss[0].kind == ViolationKind::Missing);
  CHECK(miss[0].node == 6);

  RoutePlan stale = ok;
  stale.cost += 1e-6;
  const auto cost = validate(instance, stale);
  REQUIRE(cost.size() == 1);
  CHECK(cost[0].kind == ViolationKind::CostMismatch);

  RoutePlan bad = ok;
  bad.routes[0].push_back(99);
  CHECK(validate(instance, bad).front().kind == ViolationKind::IndexOutOfRange);
}

TEST_CASE("min_cost_insert closed forms") {
  const CvrpInstance instance = line_instance();
  const RoutePlan plan = make_plan(instance, {{1}});
  const InsertionPosition where = best_insertion(instance, plan, 2);
  CHECK(where.tour == 0);
  CHECK(where.position == 0);
  CHECK(where.increase == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  const RoutePlan out = min_cost_insert(instance, plan, 2);
  CHECK(out.routes.size() == 1);
  CHECK(out.routes[0] == Tour{2, 1});
  CHECK(out.cost == doctest::Approx(2.0));

  const RoutePlan empty = min_cost_insert(instance, RoutePlan{{}, 0.0, "line"}, 1);
  REQUIRE(empty.routes.size() == 1);
  CHECK(empty.routes[0] == Tour{1});
  CHECK(empty.cost == doctest::Approx(2.0));

  CHECK_THROWS_AS(min_cost_insert(instance, plan, 1), PreconditionError);
}

TEST_CASE("min_cost_insert opens a tour when every tour is full") {
  CvrpInstance instance = line_instance();
  instance.capacity = 9;
  instance.demands = {9, 1};
  const RoutePlan out = min_cost_insert(instance, make_plan(instance, {{1}}), 2);
  CHECK(out.routes.size() == 2);
  CHECK(is_valid(instance, out));
}

TEST_CASE("min_cost_insert matches an exhaustive position scan") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = rng.uniform_int(2, 50);
    const CvrpInstance instance = sample_instance(n, rng.uniform_int(9, 40), 5000 + trial);
    const NodeId node = rng.uniform_int(1, n);
    const RoutePlan plan = testing::random_plan(instance, rng, node);
    const InsertionPosition where = best_insertion(instance, plan, node);
    const testing::ScanResult scan = testing::exhaustive_insertion(instance, plan, node);
    CHECK(where.tour == scan.tour);
    CHECK(where.position == scan.position);
    const RoutePlan out = min_cost_insert(instance, plan, node);
    CHECK(is_valid(instance, out));
    CHECK(std::abs(out.cost - scan.cost) < 1e-9);
  }
}

TEST_CASE("remove_nodes") {
  const CvrpInstance instance = sample_instance(8, 30, 9);
  Rng rng(4);
  const RoutePlan plan = testing::random_plan(instance, rng);

  NodeSet all;
  for (NodeId c = 1; c <= 8; ++c) all.push_back(c);
  const RoutePlan none = remove_nodes(instance, plan, all);
  CHECK(none.routes.empty());
  CHECK(none.cost == 0.0);

  // Mid-tour removal saves d(a,x) + d(x,b) - d(a,b).
  const RoutePlan chain = make_plan(instance, {{1, 2, 3}, {4, 5, 6, 7, 8}});
  const RoutePlan cut = remove_nodes(instance, chain, {2});
  const double saving = instance.distance(1, 2) + instance.distance(2, 3) - instance.distance(1, 3);
  CHECK(std::abs((chain.cost - cut.cost) - saving) < 1e-12);
  CHECK(cut.routes[0] == Tour{1, 3});

  const RoutePlan singles = make_plan(instance, {{1}, {2, 3, 4, 5, 6, 7, 8}});
  CHECK(remove_nodes(instance, singles, {1}).routes.size() == 1);

  const RoutePlan partial = remove_nodes(instance, chain, {1});
  CHECK_THROWS_AS(remove_nodes(instance, partial, {1}), PreconditionError);
}

TEST_CASE("remove then reinsert at a local optimum does not increase cost") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const CvrpInstance instance = sample_instance(12, 30, 300 + trial);
    RoutePlan plan = testing::random_plan(instance, rng);
    // Relocate-descent to a local optimum of the remove/reinsert move.
    bool improved = true;
    while (improved) {
      improved = false;
      for (NodeId c = 1; c <= instance.size(); ++c) {
        const RoutePlan moved = min_cost_insert(instance, remove_nodes(instance, plan, {c}), c);
        if (moved.cost < plan.cost - 1e-12) {
          plan = moved;
          improved = true;
        }
      }
    }
    for (NodeId c = 1; c <= instance.size(); ++c) {
      const RoutePlan without = remove_nodes(instance, plan, {c});
      const RoutePlan back = min_cost_insert(instance, without, c);
      CHECK(back.cost <= plan.cost + 1e-9);
      // Exhaustive check of the removal gain against every reinsertion.
      CHECK(plan.cost - without.cost >= best_insertion(instance, without, c).increase - 1e-9);
    }
  }
}

TEST_CASE("naive_initial_solution") {
  CvrpInstance one;
  one.id = "one";
  one.capacity = 10;
  one.customers = {Point(0.3, 0.4)};
  one.demands = {3};
  const RoutePlan single = naive_initial_solution(one, 1);
  REQUIRE(single.routes.size() == 1);
  CHECK(single.routes[0] == Tour{1});

  const CvrpInstance instance = sample_instance(8, 20, 42);
  const RoutePlan a = naive_initial_solution(instance, 5);
  const RoutePlan b = naive_initial_solution(instance, 5);
  CHECK(a.routes == b.routes);
  CHECK(is_valid(instance, a));

  const double optimum = brute_force_optimal(instance).cost;
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RoutePlan plan = naive_initial_solution(instance, seed);
    CHECK(is_valid(instance, plan));
    CHECK(plan.cost >= optimum - 1e-9);
    mean += plan.cost / 100.0;
  }
  CHECK(mean >= optimum);
}

TEST_CASE("brute_force_optimal") {
  CvrpInstance one;
  one.id = "one";
  one.capacity = 10;
  one.customers = {Point(0.3, 0.4)};
  one.demands = {3};
  CHECK(brute_force_optimal(one).cost == doctest::Approx(1.0));

  CvrpInstance pair = one;
  pair.customers = {Point(0.3, 0.4), Point(0.31, 0.4)};
  pair.demands = {6, 6};
  const RoutePlan split = brute_force_optimal(pair);
  CHECK(split.routes.size() == 2);
  CHECK(is_valid(pair, split));

  CHECK_THROWS_AS(brute_force_optimal(sample_instance(10, 30, 1)), ParameterError);

  for (int trial = 0; trial < 10; ++trial) {
    const CvrpInstance instance = sample_instance(6, 12, 900 + trial);
    const RoutePlan best = brute_force_optimal(instance);
    CHECK(is_valid(instance, best));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      CHECK(best.cost <= naive_initial_solution(instance, seed).cost + 1e-12);
    }
  }
}

TEST_CASE("split_giant_tour is optimal for its order on small cases") {
  // Enumerate all segmentations of a fixed order and compare.
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const CvrpInstance instance = sample_instance(7, 15, 40 + trial);
    std::vector<NodeId> order{1, 2, 3, 4, 5, 6, 7};
    rng.shuffle(order);
    double best = std::numeric_limits<double>::infinity();
    for (int cuts = 0; cuts < (1 << 6); ++cuts) {
      std::vector<Tour> routes{{order[0]}};
      for (int k = 1; k < 7; ++k) {
        if (cuts & (1 << (k - 1))) routes.push_back({});
        routes.back().push_back(order[k]);
      }
      bool feasible = true;
      for (const auto& t : routes) feasible = feasible && tour_demand(instance, t) <= instance.capacity;
      if (feasible) best = std::min(best, testing::resummed_cost(instance, routes));
    }
    CHECK(std::abs(split_giant_tour(instance, order).cost - best) < 1e-12);
  }
}

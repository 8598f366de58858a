#include "cdcp/oracle.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "cdcp/errors.hpp"

namespace cdcp {

namespace {

// Returns the split cost; fills `cut` with predecessor indices when non-null.
Real split_cost(const CvrpInstance& instance, const std::vector<NodeId>& order, std::vector<Real>& best,
                std::vector<int>& cut) {
  const int n = static_cast<int>(order.size());
  constexpr Real inf = std::numeric_limits<Real>::infinity();
  std::fill(best.begin(), best.end(), inf);
  best[0] = 0.0;
  for (int start = 0; start < n; ++start) {
    if (best[start] == inf) continue;
    int load = 0;
    Real path = 0.0;
    for (int end = start; end < n; ++end) {
      load += instance.demand(order[end]);
      if (load > instance.capacity) break;
      path += end == start ? instance.distance(0, order[end]) : instance.distance(order[end - 1], order[end]);
      const Real total = best[start] + path + instance.distance(order[end], 0);
      if (total < best[end + 1]) {
        best[end + 1] = total;
        cut[end + 1] = start;
      }
    }
  }
  return best[n];
}

}  // namespace

RoutePlan split_giant_tour(const CvrpInstance& instance, const std::vector<NodeId>& giant_tour) {
  const int n = static_cast<int>(giant_tour.size());
  std::vector<Real> best(n + 1);
  std::vector<int> cut(n + 1, 0);
  split_cost(instance, giant_tour, best, cut);
  std::vector<Tour> routes;
  for (int end = n; end > 0; end = cut[end]) {
    routes.emplace_back(giant_tour.begin() + cut[end], giant_tour.begin() + end);
  }
  std::reverse(routes.begin(), routes.end());
  return make_plan(instance, std::move(routes));
}

RoutePlan brute_force_optimal(const CvrpInstance& instance) {
  const int n = instance.size();
  if (n > kBruteForceLimit) {
    throw ParameterError("brute_force_optimal: n = " + std::to_string(n) + " exceeds the limit of " +
                         std::to_string(kBruteForceLimit) + " customers");
  }
  if (n == 0) return make_plan(instance, {});
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 1);
  std::vector<Real> best(n + 1);
  std::vector<int> cut(n + 1, 0);
  std::vector<NodeId> best_order = order;
  Real best_cost = std::numeric_limits<Real>::infinity();
  do {
    const Real cost = split_cost(instance, order, best, cut);
    if (cost < best_cost) {
      best_cost = cost;
      best_order = order;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  return split_giant_tour(instance, best_order);
}

}  // namespace cdcp

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "cdcp/cvrp.hpp"

namespace cdcp::testing {

// Random capacity-feasible plan: random order, tours closed at random points
// or when the next customer does not fit.
inline RoutePlan random_plan(const CvrpInstance& instance, Rng& rng, int skip = 0) {
  std::vector<NodeId> order;
  for (NodeId c = 1; c <= instance.size(); ++c) {
    if (c != skip) order.push_back(c);
  }
  rng.shuffle(order);
  std::vector<Tour> routes;
  Tour current;
  int load = 0;
  for (NodeId c : order) {
    if (!current.empty() && (load + instance.demand(c) > instance.capacity || rng.uniform() < 0.15)) {
      routes.push_back(current);
      current.clear();
      load = 0;
    }
    current.push_back(c);
    load += instance.demand(c);
  }
  if (!current.empty()) routes.push_back(current);
  return make_plan(instance, routes);
}

// Cost recomputed from raw coordinates, independent of CvrpInstance::distance.
inline double resummed_cost(const CvrpInstance& instance, const std::vector<Tour>& routes) {
  auto xy = [&](NodeId v) {
    const Point& p = v == 0 ? instance.depot : instance.customers[v - 1];
    return std::pair<double, double>{p.x(), p.y()};
  };
  double total = 0.0;
  for (const auto& tour : routes) {
    NodeId prev = 0;
    for (std::size_t k = 0; k <= tour.size(); ++k) {
      const NodeId next = k == tour.size() ? 0 : tour[k];
      const auto [ax, ay] = xy(prev);
      const auto [bx, by] = xy(next);
      total += std::hypot(ax - bx, ay - by);
      prev = next;
    }
  }
  return total;
}

struct ScanResult {
  int tour = -1;
  int position = -1;
  double cost = std::numeric_limits<double>::infinity();
};

// Builds every candidate plan explicitly and re-sums its cost.
inline ScanResult exhaustive_insertion(const CvrpInstance& instance, const RoutePlan& plan, NodeId node) {
  ScanResult best;
  for (std::size_t t = 0; t <= plan.routes.size(); ++t) {
    const bool fresh = t == plan.routes.size();
    const std::size_t positions = fresh ? 1 : plan.routes[t].size() + 1;
    for (std::size_t p = 0; p < positions; ++p) {
      auto routes = plan.routes;
      if (fresh) {
        routes.push_back({node});
      } else {
        routes[t].insert(routes[t].begin() + static_cast<long>(p), node);
        if (tour_demand(instance, routes[t]) > instance.capacity) continue;
      }
      const double cost = resummed_cost(instance, routes);
      if (cost < best.cost - 1e-12) best = {static_cast<int>(t), static_cast<int>(p), cost};
    }
  }
  return best;
}

}  // namespace cdcp::testing

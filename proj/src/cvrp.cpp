#include "cdcp/cvrp.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cdcp/errors.hpp"

namespace cdcp {

namespace {

bool in_unit_square(const Point& p) { return p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0; }

void check_node(const CvrpInstance& instance, NodeId node) {
  if (node < 1 || node > instance.size()) {
    throw StructuralError("customer index " + std::to_string(node) + " out of range 1.." +
                          std::to_string(instance.size()));
  }
}

}  // namespace

void CvrpInstance::check() const {
  if (capacity < 1) throw ParameterError("capacity must be positive");
  if (demands.size() != customers.size()) throw ParameterError("demands and customers differ in length");
  if (!in_unit_square(depot)) throw ParameterError("depot outside the unit square");
  for (std::size_t i = 0; i < customers.size(); ++i) {
    if (!in_unit_square(customers[i])) throw ParameterError("customer outside the unit square");
    if (demands[i] < 1 || demands[i] > capacity) throw ParameterError("demand outside [1, capacity]");
  }
}

int RoutePlan::customer_count() const {
  int count = 0;
  for (const auto& tour : routes) count += static_cast<int>(tour.size());
  return count;
}

CvrpInstance sample_instance(int n, int capacity, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample_instance: n must be >= 1");
  if (capacity < 9) throw ParameterError("sample_instance: capacity must be >= 9");
  Rng rng(seed);
  CvrpInstance instance;
  instance.id = "cvrp" + std::to_string(n) + "-" + std::to_string(seed);
  instance.capacity = capacity;
  instance.depot = Point(rng.uniform(), rng.uniform());
  instance.customers.reserve(n);
  instance.demands.reserve(n);
  for (int i = 0; i < n; ++i) instance.customers.emplace_back(rng.uniform(), rng.uniform());
  for (int i = 0; i < n; ++i) instance.demands.push_back(rng.uniform_int(1, 9));
  return instance;
}

Real tour_cost(const CvrpInstance& instance, const Tour& tour) {
  if (tour.empty()) return 0.0;
  Real cost = instance.distance(0, tour.front());
  for (std::size_t k = 1; k < tour.size(); ++k) cost += instance.distance(tour[k - 1], tour[k]);
  return cost + instance.distance(tour.back(), 0);
}

Real route_cost(const CvrpInstance& instance, const RoutePlan& plan) {
  Real cost = 0.0;
  for (const auto& tour : plan.routes) {
    for (NodeId node : tour) check_node(instance, node);
    cost += tour_cost(instance, tour);
  }
  return cost;
}

int tour_demand(const CvrpInstance& instance, const Tour& tour) {
  int load = 0;
  for (NodeId node : tour) load += instance.demand(node);
  return load;
}

RoutePlan make_plan(const CvrpInstance& instance, std::vector<Tour> routes) {
  RoutePlan plan;
  plan.routes = std::move(routes);
  plan.instance_id = instance.id;
  plan.cost = route_cost(instance, plan);
  return plan;
}

std::vector<Violation> validate(const CvrpInstance& instance, const RoutePlan& plan) {
  std::vector<Violation> out;
  std::vector<int> seen(instance.size() + 1, 0);
  bool indices_ok = true;
  for (std::size_t t = 0; t < plan.routes.size(); ++t) {
    const auto& tour = plan.routes[t];
    const int tour_index = static_cast<int>(t);
    if (tour.empty()) out.push_back({ViolationKind::EmptyTour, tour_index, -1, "tour " + std::to_string(t) + " is empty"});
    int load = 0;
    for (NodeId node : tour) {
      if (node < 1 || node > instance.size()) {
        indices_ok = false;
        out.push_back({ViolationKind::IndexOutOfRange, tour_index, node,
                       "tour " + std::to_string(t) + " references invalid customer " + std::to_string(node)});
        continue;
      }
      if (++seen[node] == 2) {
        out.push_back({ViolationKind::Duplicate, tour_index, node,
                       "customer " + std::to_string(node) + " visited more than once"});
      }
      load += instance.demand(node);
    }
    if (load > instance.capacity) {
      out.push_back({ViolationKind::CapacityExceeded, tour_index, -1,
                     "tour " + std::to_string(t) + " carries " + std::to_string(load) + " > capacity " +
                         std::to_string(instance.capacity)});
    }
  }
  for (NodeId node = 1; node <= instance.size(); ++node) {
    if (seen[node] == 0) {
      out.push_back({ViolationKind::Missing, -1, node, "customer " + std::to_string(node) + " not visited"});
    }
  }
  if (indices_ok) {
    const Real recomputed = route_cost(instance, plan);
    if (!(std::abs(recomputed - plan.cost) <= 1e-9)) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "cached cost " << plan.cost << " differs from recomputed " << recomputed;
      out.push_back({ViolationKind::CostMismatch, -1, -1, msg.str()});
    }
  }
  return out;
}

InsertionPosition best_insertion(const CvrpInstance& instance, const RoutePlan& plan, NodeId node) {
  check_node(instance, node);
  const int demand = instance.demand(node);
  InsertionPosition best;
  best.tour = static_cast<int>(plan.routes.size());
  best.position = 0;
  best.increase = 2.0 * instance.distance(0, node);
  bool found = false;
  for (std::size_t t = 0; t < plan.routes.size(); ++t) {
    const auto& tour = plan.routes[t];
    if (tour_demand(instance, tour) + demand > instance.capacity) continue;
    for (std::size_t p = 0; p <= tour.size(); ++p) {
      const NodeId prev = p == 0 ? 0 : tour[p - 1];
      const NodeId next = p == tour.size() ? 0 : tour[p];
      const Real increase = instance.distance(prev, node) + instance.distance(node, next) - instance.distance(prev, next);
      if (!found || increase < best.increase) {
        best = {static_cast<int>(t), static_cast<int>(p), increase};
        found = true;
      }
    }
  }
  // The new-tour candidate comes last in (tour, position) order.
  const Real new_tour = 2.0 * instance.distance(0, node);
  if (found && new_tour < best.increase) best = {static_cast<int>(plan.routes.size()), 0, new_tour};
  return best;
}

RoutePlan min_cost_insert(const CvrpInstance& instance, const RoutePlan& plan, NodeId node) {
  check_node(instance, node);
  for (const auto& tour : plan.routes) {
    for (NodeId present : tour) {
      if (present == node) throw PreconditionError("min_cost_insert: customer " + std::to_string(node) + " already in plan");
    }
  }
  const InsertionPosition where = best_insertion(instance, plan, node);
  RoutePlan out = plan;
  if (where.tour == static_cast<int>(out.routes.size())) {
    out.routes.push_back({node});
  } else {
    auto& tour = out.routes[where.tour];
    tour.insert(tour.begin() + where.position, node);
  }
  out.cost = plan.cost + where.increase;
  return out;
}

RoutePlan remove_nodes(const CvrpInstance& instance, const RoutePlan& plan, const NodeSet& nodes) {
  std::vector<char> remove(instance.size() + 1, 0);
  for (NodeId node : nodes) {
    check_node(instance, node);
    if (remove[node]) throw PreconditionError("remove_nodes: duplicate customer " + std::to_string(node));
    remove[node] = 1;
  }
  std::vector<char> found(instance.size() + 1, 0);
  std::vector<Tour> routes;
  routes.reserve(plan.routes.size());
  for (const auto& tour : plan.routes) {
    Tour kept;
    kept.reserve(tour.size());
    for (NodeId node : tour) {
      if (node >= 1 && node <= instance.size() && remove[node]) {
        found[node] = 1;
      } else {
        kept.push_back(node);
      }
    }
    if (!kept.empty()) routes.push_back(std::move(kept));
  }
  for (NodeId node : nodes) {
    if (!found[node]) throw PreconditionError("remove_nodes: customer " + std::to_string(node) + " not in plan");
  }
  RoutePlan out = make_plan(instance, std::move(routes));
  out.instance_id = plan.instance_id.empty() ? instance.id : plan.instance_id;
  return out;
}

RoutePlan naive_initial_solution(const CvrpInstance& instance, std::uint64_t seed) {
  std::vector<NodeId> order(instance.size());
  for (int i = 0; i < instance.size(); ++i) order[i] = i + 1;
  Rng rng(seed);
  rng.shuffle(order);
  RoutePlan plan;
  plan.instance_id = instance.id;
  for (NodeId node : order) plan = min_cost_insert(instance, plan, node);
  plan.cost = route_cost(instance, plan);
  return plan;
}

}  // namespace cdcp

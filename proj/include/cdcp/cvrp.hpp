#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdcp/rng.hpp"
#include "cdcp/types.hpp"

namespace cdcp {

// Node ids: 0 is the depot, customers are 1..n.
using NodeId = int;
using Tour = std::vector<NodeId>;

// Ordered, duplicate-free list of customer ids (removal / reinsertion order).
using NodeSet = std::vector<NodeId>;

struct CvrpInstance {
  std::string id;
  Point depot = Point::Zero();
  std::vector<Point> customers;
  std::vector<int> demands;
  int capacity = 0;

  int size() const { return static_cast<int>(customers.size()); }
  int node_count() const { return size() + 1; }

  const Point& location(NodeId node) const { return node == 0 ? depot : customers[node - 1]; }
  int demand(NodeId node) const { return node == 0 ? 0 : demands[node - 1]; }
  Real distance(NodeId a, NodeId b) const { return (location(a) - location(b)).norm(); }

  // Throws ParameterError when an instance invariant is broken.
  void check() const;
};

struct RoutePlan {
  std::vector<Tour> routes;
  Real cost = 0.0;
  std::string instance_id;

  int customer_count() const;
};

// Uniform coordinates in the unit square, demands uniform on {1..9}.
CvrpInstance sample_instance(int n, int capacity, std::uint64_t seed);

Real tour_cost(const CvrpInstance& instance, const Tour& tour);
Real route_cost(const CvrpInstance& instance, const RoutePlan& plan);
int tour_demand(const CvrpInstance& instance, const Tour& tour);

// Builds a plan from tours and caches its cost.
RoutePlan make_plan(const CvrpInstance& instance, std::vector<Tour> routes);

enum class ViolationKind { IndexOutOfRange, Missing, Duplicate, EmptyTour, CapacityExceeded, CostMismatch };

struct Violation {
  ViolationKind kind;
  int tour = -1;
  NodeId node = -1;
  std::string message;
};

std::vector<Violation> validate(const CvrpInstance& instance, const RoutePlan& plan);
inline bool is_valid(const CvrpInstance& instance, const RoutePlan& plan) {
  return validate(instance, plan).empty();
}

struct InsertionPosition {
  int tour = 0;      // == routes.size() means a new singleton tour
  int position = 0;  // insert before routes[tour][position]
  Real increase = 0.0;
};

// Cheapest capacity-feasible position for `node`, ties broken by lowest
// (tour, position). Opening a new tour is always a candidate.
InsertionPosition best_insertion(const CvrpInstance& instance, const RoutePlan& plan, NodeId node);
RoutePlan min_cost_insert(const CvrpInstance& instance, const RoutePlan& plan, NodeId node);

RoutePlan remove_nodes(const CvrpInstance& instance, const RoutePlan& plan, const NodeSet& nodes);

// Random visiting order, each customer placed by min_cost_insert.
RoutePlan naive_initial_solution(const CvrpInstance& instance, std::uint64_t seed);

}  // namespace cdcp

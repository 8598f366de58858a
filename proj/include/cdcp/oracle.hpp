#pragma once

#include "cdcp/cvrp.hpp"

namespace cdcp {

inline constexpr int kBruteForceLimit = 9;

// Exact optimum: every customer permutation, each split into capacity-feasible
// tours by a shortest-path segmentation. Refuses n > kBruteForceLimit.
RoutePlan brute_force_optimal(const CvrpInstance& instance);

// Optimal segmentation of a fixed giant tour into depot-to-depot tours.
RoutePlan split_giant_tour(const CvrpInstance& instance, const std::vector<NodeId>& giant_tour);

}  // namespace cdcp

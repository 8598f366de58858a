#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdcp/cvrp.hpp"

namespace cdcp::io {

// One JSON object per line:
//   {"id", "capacity", "depot":[x,y], "coords":[[x,y],...], "demands":[...]}
nlohmann::json instance_to_json(const CvrpInstance& instance);
CvrpInstance instance_from_json(const nlohmann::json& j);

// {"id", "routes":[[i,...],...], "cost"}; customers are 1-based, depot 0 is implicit.
nlohmann::json solution_to_json(const RoutePlan& plan);
RoutePlan solution_from_json(const nlohmann::json& j);

void write_instances(const std::string& path, const std::vector<CvrpInstance>& instances);
std::vector<CvrpInstance> read_instances(const std::string& path);

void write_solutions(const std::string& path, const std::vector<RoutePlan>& plans);
std::vector<RoutePlan> read_solutions(const std::string& path);

// id -> cost, read from a solutions file.
std::map<std::string, Real> read_reference_costs(const std::string& path);

}  // namespace cdcp::io

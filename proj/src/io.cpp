#include "cdcp/io.hpp"

#include <fstream>

#include "cdcp/errors.hpp"

namespace cdcp::io {

using nlohmann::json;

namespace {

std::vector<json> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_lines(const std::string& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& line : lines) out << line.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

json instance_to_json(const CvrpInstance& instance) {
  json coords = json::array();
  for (const auto& p : instance.customers) coords.push_back({p.x(), p.y()});
  return json{{"id", instance.id},
              {"capacity", instance.capacity},
              {"depot", {instance.depot.x(), instance.depot.y()}},
              {"coords", coords},
              {"demands", instance.demands}};
}

CvrpInstance instance_from_json(const json& j) {
  try {
    CvrpInstance instance;
    instance.id = j.at("id").get<std::string>();
    instance.capacity = j.at("capacity").get<int>();
    const auto& depot = j.at("depot");
    instance.depot = Point(depot.at(0).get<Real>(), depot.at(1).get<Real>());
    for (const auto& c : j.at("coords")) instance.customers.emplace_back(c.at(0).get<Real>(), c.at(1).get<Real>());
    instance.demands = j.at("demands").get<std::vector<int>>();
    instance.check();
    return instance;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed instance: ") + e.what());
  }
}

json solution_to_json(const RoutePlan& plan) {
  return json{{"id", plan.instance_id}, {"routes", plan.routes}, {"cost", plan.cost}};
}

RoutePlan solution_from_json(const json& j) {
  try {
    RoutePlan plan;
    plan.instance_id = j.at("id").get<std::string>();
    plan.routes = j.at("routes").get<std::vector<Tour>>();
    plan.cost = j.at("cost").get<Real>();
    return plan;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed solution: ") + e.what());
  }
}

void write_instances(const std::string& path, const std::vector<CvrpInstance>& instances) {
  std::vector<json> lines;
  lines.reserve(instances.size());
  for (const auto& instance : instances) lines.push_back(instance_to_json(instance));
  write_lines(path, lines);
}

std::vector<CvrpInstance> read_instances(const std::string& path) {
  std::vector<CvrpInstance> out;
  for (const auto& line : read_lines(path)) out.push_back(instance_from_json(line));
  return out;
}

void write_solutions(const std::string& path, const std::vector<RoutePlan>& plans) {
  std::vector<json> lines;
  lines.reserve(plans.size());
  for (const auto& plan : plans) lines.push_back(solution_to_json(plan));
  write_lines(path, lines);
}

std::vector<RoutePlan> read_solutions(const std::string& path) {
  std::vector<RoutePlan> out;
  for (const auto& line : read_lines(path)) out.push_back(solution_from_json(line));
  return out;
}

std::map<std::string, Real> read_reference_costs(const std::string& path) {
  std::map<std::string, Real> out;
  for (const auto& plan : read_solutions(path)) out[plan.instance_id] = plan.cost;
  return out;
}

}  // namespace cdcp::io

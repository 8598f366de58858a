#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cdcp/autodiff.hpp"
#include "cdcp/rng.hpp"

namespace cdcp {

// Named, ordered collection of trainable leaves.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ad::Var var;
  };

  // Registers a parameter initialised uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  ad::Var add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);
  ad::Var add(const std::string& name, Matrix value);

  const ad::Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<ad::Var> vars() const;
  Eigen::Index parameter_count() const;

  void zero_grad();
  // Concatenated gradients in registration order; missing gradients read as 0.
  Vector flat_grad() const;
  Vector flat_values() const;
  void set_flat_values(const Vector& values);

  // value += step * grad for every parameter.
  void apply_gradient(Real step);

  // Independent copy of values (gradients are not copied).
  ParameterStore clone() const;

  nlohmann::json to_json() const;
  static ParameterStore from_json(const nlohmann::json& j);

 private:
  std::vector<Entry> entries_;
};

// Adam moments over a store's flat parameter vector.
class Adam {
 public:
  explicit Adam(Real learning_rate = 1e-3, Real beta1 = 0.9, Real beta2 = 0.999, Real epsilon = 1e-8);

  // value += direction * learning_rate * m_hat / (sqrt(v_hat) + epsilon), using
  // the gradients currently held by `store`. direction -1 descends, +1 ascends.
  void step(ParameterStore& store, Real direction);

  Real learning_rate() const { return learning_rate_; }
  long steps() const { return t_; }

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& j);

 private:
  Real learning_rate_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  Vector m_, v_;
};

}  // namespace cdcp

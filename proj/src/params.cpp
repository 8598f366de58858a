#include "cdcp/params.hpp"

#include <cmath>

#include "cdcp/errors.hpp"

namespace cdcp {

ad::Var ParameterStore::add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                    Eigen::Index fan_in, Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
  Matrix value(rows, cols);
  for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = rng.uniform(-bound, bound);
  return add(name, std::move(value));
}

ad::Var ParameterStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw ParameterError("duplicate parameter " + name);
  entries_.push_back({name, ad::parameter(std::move(value))});
  return entries_.back().var;
}

const ad::Var& ParameterStore::get(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.var;
  }
  throw FormatError("missing parameter " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::vector<ad::Var> ParameterStore::vars() const {
  std::vector<ad::Var> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.var);
  return out;
}

Eigen::Index ParameterStore::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto& e : entries_) count += e.var.size();
  return count;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

Vector ParameterStore::flat_grad() const {
  Vector out(parameter_count());
  Eigen::Index at = 0;
  for (const auto& e : entries_) {
    const Eigen::Index size = e.var.size();
    if (e.var.grad().size() == size) {
      out.segment(at, size) = e.var.grad().reshaped();
    } else {
      out.segment(at, size).setZero();
    }
    at += size;
  }
  return out;
}

Vector ParameterStore::flat_values() const {
  Vector out(parameter_count());
  Eigen::Index at = 0;
  for (const auto& e : entries_) {
    out.segment(at, e.var.size()) = e.var.value().reshaped();
    at += e.var.size();
  }
  return out;
}

void ParameterStore::set_flat_values(const Vector& values) {
  if (values.size() != parameter_count()) throw ShapeError("set_flat_values: size mismatch");
  Eigen::Index at = 0;
  for (auto& e : entries_) {
    Matrix& value = e.var.value_mut();
    value.reshaped() = values.segment(at, value.size());
    at += value.size();
  }
}

void ParameterStore::apply_gradient(Real step) {
  for (auto& e : entries_) {
    if (e.var.grad().size() == e.var.size()) e.var.value_mut() += step * e.var.grad();
  }
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& e : entries_) out.add(e.name, e.var.value());
  return out;
}

nlohmann::json ParameterStore::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : entries_) {
    const Matrix& v = e.var.value();
    std::vector<Real> data(v.data(), v.data() + v.size());
    out.push_back({{"name", e.name}, {"rows", v.rows()}, {"cols", v.cols()}, {"data", data}});
  }
  return out;
}

ParameterStore ParameterStore::from_json(const nlohmann::json& j) {
  ParameterStore out;
  try {
    for (const auto& item : j) {
      const auto rows = item.at("rows").get<Eigen::Index>();
      const auto cols = item.at("cols").get<Eigen::Index>();
      const auto data = item.at("data").get<std::vector<Real>>();
      if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw FormatError("parameter " + item.at("name").get<std::string>() + " has wrong element count");
      }
      out.add(item.at("name").get<std::string>(), Eigen::Map<const Matrix>(data.data(), rows, cols));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed parameter block: ") + e.what());
  }
  return out;
}

Adam::Adam(Real learning_rate, Real beta1, Real beta2, Real epsilon)
    : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (!(learning_rate >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ParameterError("Adam: invalid hyper-parameters");
  }
}

void Adam::step(ParameterStore& store, Real direction) {
  const Vector g = store.flat_grad();
  if (!g.allFinite()) throw NumericError("Adam: non-finite gradient");
  if (m_.size() == 0) {
    m_ = Vector::Zero(g.size());
    v_ = Vector::Zero(g.size());
  }
  if (m_.size() != g.size()) throw ShapeError("Adam: store size changed between steps");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * g;
  v_ = beta2_ * v_ + (1.0 - beta2_) * g.cwiseProduct(g);
  const Real c1 = 1.0 - std::pow(beta1_, static_cast<Real>(t_));
  const Real c2 = 1.0 - std::pow(beta2_, static_cast<Real>(t_));
  const Vector update = (m_ / c1).array() / ((v_ / c2).array().sqrt() + epsilon_);
  store.set_flat_values(store.flat_values() + direction * learning_rate_ * update);
}

namespace {

nlohmann::json vector_json(const Vector& v) { return std::vector<Real>(v.data(), v.data() + v.size()); }

Vector json_vector(const nlohmann::json& j) {
  const auto values = j.get<std::vector<Real>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json Adam::to_json() const {
  return {{"learning_rate", learning_rate_}, {"beta1", beta1_}, {"beta2", beta2_}, {"epsilon", epsilon_},
          {"t", t_}, {"m", vector_json(m_)}, {"v", vector_json(v_)}};
}

Adam Adam::from_json(const nlohmann::json& j) {
  Adam a(j.at("learning_rate").get<Real>(), j.at("beta1").get<Real>(), j.at("beta2").get<Real>(),
         j.at("epsilon").get<Real>());
  a.t_ = j.at("t").get<long>();
  a.m_ = json_vector(j.at("m"));
  a.v_ = json_vector(j.at("v"));
  return a;
}

}  // namespace cdcp

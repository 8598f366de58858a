#include "cdcp/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cdcp/errors.hpp"

namespace cdcp::ad {

namespace {

thread_local bool g_recording = true;
thread_local TapeStats g_stats;
thread_local std::uint64_t g_visit_epoch = 0;
thread_local BranchScope* g_branch_scope = nullptr;

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

void count(Node& node) {
  node.counted = node.value.size();
  g_stats.elements += static_cast<std::size_t>(node.counted);
  g_stats.nodes += 1;
  g_stats.peak_elements = std::max(g_stats.peak_elements, g_stats.elements);
  g_stats.peak_nodes = std::max(g_stats.peak_nodes, g_stats.nodes);
}

bool mask_at(const Mask& mask, Eigen::Index i, Eigen::Index j) { return mask.rows() == 1 ? mask(0, j) : mask(i, j); }

void check_mask(const char* op, const Matrix& a, const Mask& mask) {
  const bool row_mask = mask.rows() == 1 && mask.cols() == a.cols();
  const bool full_mask = mask.rows() == a.rows() && mask.cols() == a.cols();
  if (!row_mask && !full_mask) {
    throw ShapeError(std::string(op) + ": mask " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                     " does not fit " + shape(a));
  }
}

Matrix softmax_rows(const Matrix& a, const Mask& mask) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    Real best = -std::numeric_limits<Real>::infinity();
    bool any = false;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (!mask_at(mask, i, j)) {
        best = std::max(best, a(i, j));
        any = true;
      }
    }
    if (!any) throw DegenerateMaskError("softmax row " + std::to_string(i) + " has every entry masked");
    Real total = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const Real e = mask_at(mask, i, j) ? 0.0 : std::exp(a(i, j) - best);
      out(i, j) = e;
      total += e;
    }
    out.row(i) /= total;
  }
  return out;
}

}  // namespace

BranchScope::BranchScope(BranchLog& log, Mode mode) : log_(&log), mode_(mode), previous_(g_branch_scope) {
  if (mode == Mode::Capture) log.picks.clear();
  g_branch_scope = this;
}

BranchScope::~BranchScope() { g_branch_scope = previous_; }

void BranchScope::finish() const {
  if (mode_ == Mode::Replay && cursor_ != log_->picks.size()) {
    throw DeterminismError("branch replay used " + std::to_string(cursor_) + " of " +
                           std::to_string(log_->picks.size()) + " logged primitives");
  }
}

std::vector<std::uint8_t> branch_picks(const char* op, std::vector<std::uint8_t> computed) {
  BranchScope* scope = g_branch_scope;
  if (scope == nullptr) return computed;
  if (scope->mode_ == BranchScope::Mode::Capture) {
    scope->log_->picks.push_back(computed);
    return computed;
  }
  if (scope->cursor_ >= scope->log_->picks.size() || scope->log_->picks[scope->cursor_].size() != computed.size()) {
    throw DeterminismError(std::string(op) + ": branch replay does not match the captured evaluation");
  }
  return scope->log_->picks[scope->cursor_++];
}

Node::~Node() { uncount(); }

void Node::uncount() {
  if (counted > 0) {
    g_stats.elements -= static_cast<std::size_t>(counted);
    g_stats.nodes -= 1;
    counted = 0;
  }
}

Var Var::leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

void Var::zero_grad() {
  node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
}

Real Var::scalar() const {
  if (size() != 1) throw ShapeError("scalar(): value is " + shape(value()));
  return value()(0, 0);
}

Var Var::detach() const { return Var::leaf(value(), false); }

Var constant(Matrix value) { return Var::leaf(std::move(value), false); }
Var parameter(Matrix value) { return Var::leaf(std::move(value), true); }
Var scalar_constant(Real value) { return constant(Matrix::Constant(1, 1, value)); }

bool recording() { return g_recording; }

RecordScope::RecordScope(bool enabled) : previous_(g_recording) { g_recording = enabled; }
RecordScope::~RecordScope() { g_recording = previous_; }

const TapeStats& tape_stats() { return g_stats; }

RetainedEpoch::RetainedEpoch() : base_elements_(g_stats.elements), base_nodes_(g_stats.nodes) {
  g_stats.peak_elements = g_stats.elements;
  g_stats.peak_nodes = g_stats.nodes;
}

std::size_t RetainedEpoch::peak() const { return g_stats.peak_elements - base_elements_; }
std::size_t RetainedEpoch::peak_nodes() const { return g_stats.peak_nodes - base_nodes_; }

Var make_result(Matrix value, std::vector<NodePtr> parents, std::function<void(Node&)> rule) {
  const bool tracked = g_recording && std::any_of(parents.begin(), parents.end(),
                                                  [](const NodePtr& p) { return p->requires_grad; });
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (tracked) {
    node->requires_grad = true;
    node->leaf = false;
    node->parents = std::move(parents);
    node->backward = std::move(rule);
    count(*node);
  }
  return Var(std::move(node));
}

void accumulate(Node& parent, const Matrix& g) {
  if (!parent.requires_grad) return;
  if (parent.grad.size() == 0) {
    parent.grad = g;
  } else {
    parent.grad += g;
  }
}

void backward(const Var& root, Retain retain) {
  if (!root.defined()) throw LifecycleError("backward: undefined root");
  if (root.size() != 1) throw ShapeError("backward: root must be scalar, got " + shape(root.value()));
  if (root.released()) throw LifecycleError("backward: graph of root was already released");
  if (!root.requires_grad()) throw LifecycleError("backward: root is not recorded");
  if (root.is_leaf()) {
    accumulate(*root.node(), Matrix::Ones(1, 1));
    return;
  }

  // Post-order over interior nodes; reversed it is a topological order.
  const std::uint64_t epoch = ++g_visit_epoch;
  std::vector<NodePtr> order;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  root.node()->mark = epoch;
  stack.emplace_back(root.node(), 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const NodePtr& parent = node->parents[next++];
      if (parent->leaf || parent->mark == epoch) continue;
      if (parent->released) throw LifecycleError("backward: graph passes through a released node");
      parent->mark = epoch;
      stack.emplace_back(parent, 0);
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  root.node()->grad = Matrix::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& node = **it;
    if (node.grad.size() != 0) node.backward(node);
    node.grad.resize(0, 0);
  }

  if (retain == Retain::Free) {
    for (auto& node : order) {
      node->parents.clear();
      node->backward = nullptr;
      node->released = true;
      node->uncount();
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape(a.value()) + " * " + shape(b.value()));
  return make_result(a.value() * b.value(), {a.node(), b.node()}, [](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& B = self.parents[1]->value;
    if (self.parents[0]->requires_grad) accumulate(*self.parents[0], self.grad * B.transpose());
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], A.transpose() * self.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: " + shape(a.value()) + " * " + shape(b.value()) + "^T");
  return make_result(a.value() * b.value().transpose(), {a.node(), b.node()}, [](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& B = self.parents[1]->value;
    if (self.parents[0]->requires_grad) accumulate(*self.parents[0], self.grad * B);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], self.grad.transpose() * A);
  });
}

Var transpose(const Var& a) {
  return make_result(a.value().transpose(), {a.node()},
                     [](Node& self) { accumulate(*self.parents[0], self.grad.transpose()); });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  return make_result(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    accumulate(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  return make_result(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  return make_result(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) accumulate(*self.parents[0], self.grad.cwiseProduct(self.parents[1]->value));
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], self.grad.cwiseProduct(self.parents[0]->value));
  });
}

Var scale(const Var& a, Real factor) {
  return make_result(a.value() * factor, {a.node()},
                     [factor](Node& self) { accumulate(*self.parents[0], self.grad * factor); });
}

Var affine(const Var& a, Real factor, Real shift) {
  Matrix value = (a.value() * factor).array() + shift;
  return make_result(std::move(value), {a.node()},
                     [factor](Node& self) { accumulate(*self.parents[0], self.grad * factor); });
}

Var add_row_broadcast(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row_broadcast: " + shape(a.value()) + " + " + shape(row.value()));
  }
  Matrix value = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(value), {a.node(), row.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], self.grad.colwise().sum());
  });
}

Var add_col_broadcast(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw ShapeError("add_col_broadcast: " + shape(a.value()) + " + " + shape(col.value()));
  }
  Matrix value = a.value().colwise() + col.value().col(0);
  return make_result(std::move(value), {a.node(), col.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], self.grad.rowwise().sum());
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix value(rows, cols);
  std::vector<NodePtr> parents;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    parents.push_back(p.node());
  }
  return make_result(std::move(value), std::move(parents), [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& parent : self.parents) {
      const Eigen::Index width = parent->value.cols();
      if (parent->requires_grad) accumulate(*parent, self.grad.middleCols(offset, width));
      offset += width;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix value(rows, cols);
  std::vector<NodePtr> parents;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    parents.push_back(p.node());
  }
  return make_result(std::move(value), std::move(parents), [](Node& self) {
    Eigen::Index offset = 0;
    for (auto& parent : self.parents) {
      const Eigen::Index height = parent->value.rows();
      if (parent->requires_grad) accumulate(*parent, self.grad.middleRows(offset, height));
      offset += height;
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
  return make_result(a.value().middleCols(start, count), {a.node()}, [start, count](Node& self) {
    Matrix g = Matrix::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
    g.middleCols(start, count) = self.grad;
    accumulate(*self.parents[0], g);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
  return make_result(a.value().middleRows(start, count), {a.node()}, [start, count](Node& self) {
    Matrix g = Matrix::Zero(self.parents[0]->value.rows(), self.parents[0]->value.cols());
    g.middleRows(start, count) = self.grad;
    accumulate(*self.parents[0], g);
  });
}

namespace {

using RowMajor = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix reshape_row_major(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  RowMajor flat = m;
  return Eigen::Map<const RowMajor>(flat.data(), rows, cols);
}

}  // namespace

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.size()) throw ShapeError("reshape: element count mismatch");
  return make_result(reshape_row_major(a.value(), rows, cols), {a.node()}, [](Node& self) {
    const Matrix& in = self.parents[0]->value;
    accumulate(*self.parents[0], reshape_row_major(self.grad, in.rows(), in.cols()));
  });
}

Var masked_softmax(const Var& a, const Mask& mask) {
  check_mask("masked_softmax", a.value(), mask);
  return make_result(softmax_rows(a.value(), mask), {a.node()}, [](Node& self) {
    const Matrix& y = self.value;
    const Vector dot = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = y.cwiseProduct(self.grad.colwise() - dot);
    accumulate(*self.parents[0], g);
  });
}

Var masked_log_softmax(const Var& a, const Mask& mask) {
  check_mask("masked_log_softmax", a.value(), mask);
  const Matrix& x = a.value();
  Matrix prob = softmax_rows(x, mask);
  Matrix value(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Real best = -std::numeric_limits<Real>::infinity();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!mask_at(mask, i, j)) best = std::max(best, x(i, j));
    }
    Real total = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (!mask_at(mask, i, j)) total += std::exp(x(i, j) - best);
    }
    const Real lse = best + std::log(total);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      value(i, j) = mask_at(mask, i, j) ? -std::numeric_limits<Real>::infinity() : x(i, j) - lse;
    }
  }
  return make_result(std::move(value), {a.node()}, [prob = std::move(prob), mask](Node& self) {
    Matrix g = self.grad;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) {
        if (mask_at(mask, i, j)) g(i, j) = 0.0;
      }
    }
    const Vector total = g.rowwise().sum();
    g -= prob.cwiseProduct(total.replicate(1, g.cols()));
    accumulate(*self.parents[0], g);
  });
}

Var softmax(const Var& a) { return masked_softmax(a, Mask::Constant(1, a.cols(), false)); }

Var leaky_relu(const Var& a, Real slope) {
  const Matrix& x = a.value();
  std::vector<std::uint8_t> up(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) up[i] = x.data()[i] > 0.0;
  up = branch_picks("leaky_relu", std::move(up));
  Matrix value(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) value.data()[i] = up[i] ? x.data()[i] : slope * x.data()[i];
  return make_result(std::move(value), {a.node()}, [slope, up = std::move(up)](Node& self) {
    Matrix g = self.grad;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (!up[i]) g.data()[i] *= slope;
    }
    accumulate(*self.parents[0], g);
  });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var tanh(const Var& a) {
  Matrix value = a.value().array().tanh();
  return make_result(std::move(value), {a.node()}, [](Node& self) {
    Matrix g = self.grad.array() * (1.0 - self.value.array().square());
    accumulate(*self.parents[0], g);
  });
}

Var sigmoid(const Var& a) {
  Matrix value = a.value().unaryExpr([](Real x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make_result(std::move(value), {a.node()}, [](Node& self) {
    Matrix g = self.grad.array() * self.value.array() * (1.0 - self.value.array());
    accumulate(*self.parents[0], g);
  });
}

Var exp(const Var& a) {
  // std::exp keeps exp(-inf) == 0 exactly.
  Matrix value = a.value().unaryExpr([](Real x) { return std::exp(x); });
  return make_result(std::move(value), {a.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.cwiseProduct(self.value));
  });
}

Var log(const Var& a) {
  Matrix value = a.value().array().log();
  return make_result(std::move(value), {a.node()}, [](Node& self) {
    accumulate(*self.parents[0], self.grad.cwiseQuotient(self.parents[0]->value));
  });
}

Var sum(const Var& a) {
  return make_result(Matrix::Constant(1, 1, a.value().sum()), {a.node()}, [](Node& self) {
    const Matrix& x = self.parents[0]->value;
    accumulate(*self.parents[0], Matrix::Constant(x.rows(), x.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  if (a.size() == 0) throw ShapeError("mean: empty input");
  return make_result(Matrix::Constant(1, 1, a.value().mean()), {a.node()}, [](Node& self) {
    const Matrix& x = self.parents[0]->value;
    accumulate(*self.parents[0], Matrix::Constant(x.rows(), x.cols(), self.grad(0, 0) / static_cast<Real>(x.size())));
  });
}

Var mean_rows(const Var& a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: empty input");
  return make_result(a.value().colwise().mean(), {a.node()}, [](Node& self) {
    const Matrix& x = self.parents[0]->value;
    Matrix g = (self.grad / static_cast<Real>(x.rows())).replicate(x.rows(), 1);
    accumulate(*self.parents[0], g);
  });
}

Var gather(const Var& a, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || row >= a.rows() || col < 0 || col >= a.cols()) throw ShapeError("gather: index out of range");
  return make_result(Matrix::Constant(1, 1, a.value()(row, col)), {a.node()}, [row, col](Node& self) {
    const Matrix& x = self.parents[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g(row, col) = self.grad(0, 0);
    accumulate(*self.parents[0], g);
  });
}

Var gather_rows(const Var& a, std::span<const int> rows) {
  Matrix value(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    value.row(static_cast<Eigen::Index>(k)) = a.value().row(rows[k]);
  }
  std::vector<int> index(rows.begin(), rows.end());
  return make_result(std::move(value), {a.node()}, [index = std::move(index)](Node& self) {
    const Matrix& x = self.parents[0]->value;
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k < index.size(); ++k) g.row(index[k]) += self.grad.row(static_cast<Eigen::Index>(k));
    accumulate(*self.parents[0], g);
  });
}

Var edge_aggregate(const Var& alpha, const Var& edges) {
  const Eigen::Index n = alpha.rows();
  if (alpha.cols() != n || edges.rows() != n * n) {
    throw ShapeError("edge_aggregate: " + shape(alpha.value()) + " with " + shape(edges.value()));
  }
  const Eigen::Index d = edges.cols();
  Matrix value(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    value.row(i) = alpha.value().row(i) * edges.value().middleRows(i * n, n);
  }
  return make_result(std::move(value), {alpha.node(), edges.node()}, [n](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& E = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Matrix ga(n, n);
      for (Eigen::Index i = 0; i < n; ++i) ga.row(i) = self.grad.row(i) * E.middleRows(i * n, n).transpose();
      accumulate(*self.parents[0], ga);
    }
    if (self.parents[1]->requires_grad) {
      Matrix ge(E.rows(), E.cols());
      for (Eigen::Index i = 0; i < n; ++i) ge.middleRows(i * n, n) = A.row(i).transpose() * self.grad.row(i);
      accumulate(*self.parents[1], ge);
    }
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape("minimum", a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  std::vector<std::uint8_t> pick_a(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) pick_a[i] = x.data()[i] <= y.data()[i];
  pick_a = branch_picks("minimum", std::move(pick_a));
  Matrix value(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) value.data()[i] = pick_a[i] ? x.data()[i] : y.data()[i];
  return make_result(std::move(value), {a.node(), b.node()}, [pick_a = std::move(pick_a)](Node& self) {
    Matrix ga = Matrix::Zero(self.grad.rows(), self.grad.cols());
    Matrix gb = ga;
    for (Eigen::Index i = 0; i < ga.size(); ++i) (pick_a[i] ? ga : gb).data()[i] = self.grad.data()[i];
    if (self.parents[0]->requires_grad) accumulate(*self.parents[0], ga);
    if (self.parents[1]->requires_grad) accumulate(*self.parents[1], gb);
  });
}

Var clamp(const Var& a, Real lo, Real hi) {
  // Piece 0 is lo, 1 passes the input through, 2 is hi.
  const Matrix& x = a.value();
  std::vector<std::uint8_t> piece(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Real v = x.data()[i];
    piece[i] = v < lo ? 0 : (v > hi ? 2 : 1);
  }
  piece = branch_picks("clamp", std::move(piece));
  Matrix value(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) value.data()[i] = piece[i] == 0 ? lo : (piece[i] == 2 ? hi : x.data()[i]);
  return make_result(std::move(value), {a.node()}, [piece = std::move(piece)](Node& self) {
    Matrix g = self.grad;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (piece[i] != 1) g.data()[i] = 0.0;
    }
    accumulate(*self.parents[0], g);
  });
}

}  // namespace cdcp::ad

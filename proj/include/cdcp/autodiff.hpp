#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// Every value is a 2-D matrix (scalars are 1x1). Operations executed while
// recording is enabled, with at least one input that requires a gradient,
// produce interior nodes that keep their inputs alive through shared
// ownership; the set of live interior nodes is the retained graph. Its size
// (in matrix elements) is tracked per thread so training procedures can report
// their peak graph footprint.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "cdcp/types.hpp"

namespace cdcp::ad {

struct Node {
  Matrix value;
  // Leaves accumulate here across backward passes; interior nodes use it as
  // scratch during a single pass.
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  Eigen::Index counted = 0;
  std::uint64_t mark = 0;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  ~Node();

  void uncount();
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  static Var leaf(Matrix value, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Direct access for optimizer updates of leaves.
  Matrix& value_mut() { return node_->value; }
  // Accumulated gradient of a leaf; empty until a backward pass reaches it.
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad_mut() { return node_->grad; }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  bool released() const { return node_->released; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  Real scalar() const;

  // Same value, cut from the graph.
  Var detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

Var constant(Matrix value);
Var parameter(Matrix value);
Var scalar_constant(Real value);

// ---------------------------------------------------------------------------
// Recording control and retained-graph accounting.

bool recording();

class RecordScope {
 public:
  explicit RecordScope(bool enabled);
  ~RecordScope();
  RecordScope(const RecordScope&) = delete;
  RecordScope& operator=(const RecordScope&) = delete;

 private:
  bool previous_;
};

template <typename Body>
decltype(auto) record_scope(bool enabled, Body&& body) {
  RecordScope scope(enabled);
  return std::forward<Body>(body)();
}

struct TapeStats {
  std::size_t nodes = 0;
  std::size_t elements = 0;
  std::size_t peak_nodes = 0;
  std::size_t peak_elements = 0;
};

// Counters for the calling thread.
const TapeStats& tape_stats();

// Measures the peak retained graph (in elements) relative to the level at
// construction. Epochs do not nest.
class RetainedEpoch {
 public:
  RetainedEpoch();
  std::size_t peak() const;
  std::size_t peak_nodes() const;

 private:
  std::size_t base_elements_;
  std::size_t base_nodes_;
};

// Piecewise-linear primitives (leaky_relu, relu, minimum, clamp) pick a piece
// per element from their inputs. Under a BranchScope in Capture mode those
// picks are appended to a BranchLog in evaluation order; in Replay mode the
// same primitives reuse the logged picks instead, so an evaluation at nearby
// inputs stays on the captured pieces. Replay needs the identical sequence of
// primitives and shapes and raises DeterminismError otherwise.
struct BranchLog {
  std::vector<std::vector<std::uint8_t>> picks;
};

class BranchScope {
 public:
  enum class Mode { Capture, Replay };
  BranchScope(BranchLog& log, Mode mode);
  ~BranchScope();
  BranchScope(const BranchScope&) = delete;
  BranchScope& operator=(const BranchScope&) = delete;

  // Throws DeterminismError when a replay left logged picks unused.
  void finish() const;

 private:
  BranchLog* log_;
  Mode mode_;
  std::size_t cursor_ = 0;
  BranchScope* previous_;
  friend std::vector<std::uint8_t> branch_picks(const char*, std::vector<std::uint8_t>);
};

// ---------------------------------------------------------------------------
// Gradient computation.

enum class Retain { Free, Graph };

// Adds d(root)/d(leaf) into the gradient of every reachable leaf that requires
// one. With Retain::Free the traversed interior nodes are released afterwards
// and may not be differentiated through again.
void backward(const Var& root, Retain retain = Retain::Free);

// ---------------------------------------------------------------------------
// Primitives.

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, Real factor);
// factor * a + shift, elementwise
Var affine(const Var& a, Real factor, Real shift);
// a (r x c) + row (1 x c) on every row
Var add_row_broadcast(const Var& a, const Var& row);
// a (r x c) + col (r x 1) on every column
Var add_col_broadcast(const Var& a, const Var& col);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
// Row-major reinterpretation: element (i, j) of the result is element
// i * cols + j of the row-major flattening of a.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);

// Row-wise softmax. `mask` is either the shape of a or a single row applied
// to every row; masked entries get probability exactly 0. A row with every
// entry masked raises DegenerateMaskError.
Var masked_softmax(const Var& a, const Mask& mask);
Var masked_log_softmax(const Var& a, const Mask& mask);
Var softmax(const Var& a);

Var leaky_relu(const Var& a, Real slope);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
// Column means (1 x c).
Var mean_rows(const Var& a);

Var gather(const Var& a, Eigen::Index row, Eigen::Index col);
Var gather_rows(const Var& a, std::span<const int> rows);

// out_i = sum_j alpha(i, j) * edges.row(i * n + j) for alpha n x n, edges n^2 x d.
Var edge_aggregate(const Var& alpha, const Var& edges);

Var minimum(const Var& a, const Var& b);
Var clamp(const Var& a, Real lo, Real hi);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

// Building block for custom primitives: returns a recorded node when recording
// is on and any parent requires a gradient, otherwise a constant.
Var make_result(Matrix value, std::vector<NodePtr> parents, std::function<void(Node&)> rule);
// Adds g into parent's gradient slot when the parent requires one.
void accumulate(Node& parent, const Matrix& g);

}  // namespace cdcp::ad

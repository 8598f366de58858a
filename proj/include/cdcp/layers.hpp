#pragma once

#include <string>

#include "cdcp/autodiff.hpp"
#include "cdcp/params.hpp"

namespace cdcp::nn {

using ad::Var;

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out, undefined when the layer has none

  static Linear create(ParameterStore& store, const std::string& name, int in, int out, bool with_bias, Rng& rng);
  static Linear bind(const ParameterStore& store, const std::string& name, bool with_bias);
};

Var linear(const Linear& layer, const Var& x);

// Multi-head attention with per-head query/key/value slices of full-width
// projections and an output projection.
struct MhaLayer {
  int heads = 1;
  int width = 0;
  Var wq, wk, wv, wo;  // width x width

  int head_width() const { return width / heads; }

  static MhaLayer create(ParameterStore& store, const std::string& name, int width, int heads, Rng& rng);
  static MhaLayer bind(const ParameterStore& store, const std::string& name, int width, int heads);
};

// Concatenated per-head attention outputs, before the output projection.
// `key_mask` is 1 x keys (shared by all queries) or queries x keys.
Var mha_heads(const MhaLayer& layer, const Var& queries, const Var& keys, const Var& values, const Mask& key_mask);
Var mha(const MhaLayer& layer, const Var& queries, const Var& keys, const Var& values, const Mask& key_mask);

Var skip_connect(const Var& x, const Var& sublayer_out);

// Graph attention layer conditioned on edge features. Logits are
// LeakyReLU(a . [W h_i || W h_j || U e_ij]); messages are W h_j + U e_ij,
// aggregated by attention-weighted sum and added back to h_i after LeakyReLU.
struct EgateLayer {
  int node_width = 0;
  int edge_width = 0;
  Real slope = 0.2;
  Var w_node;  // node_width x node_width
  Var w_edge;  // edge_width x node_width
  Var a_src, a_dst, a_edge;  // node_width x 1

  static EgateLayer create(ParameterStore& store, const std::string& name, int node_width, int edge_width, Rng& rng);
  static EgateLayer bind(const ParameterStore& store, const std::string& name, int node_width, int edge_width);
};

// nodes: n x node_width; edges: n^2 x edge_width with row i * n + j for (i, j);
// mask: n x n, true where the edge is excluded.
Var egate_forward(const EgateLayer& layer, const Var& nodes, const Var& edges, const Mask& mask);

struct GruCell {
  int input_width = 0;
  int hidden_width = 0;
  Var w_z, u_z, b_z;
  Var w_r, u_r, b_r;
  Var w_n, u_n, b_n;

  static GruCell create(ParameterStore& store, const std::string& name, int input_width, int hidden_width, Rng& rng);
  static GruCell bind(const ParameterStore& store, const std::string& name, int input_width, int hidden_width);
};

// Rows of input / hidden are independent sequences.
Var gru_step(const GruCell& cell, const Var& input, const Var& hidden);

// Dense ReLU layer followed by a linear scalar output.
struct Critic {
  Linear hidden;
  Linear out;

  static Critic create(ParameterStore& store, const std::string& name, int in, int hidden_width, Rng& rng);
  static Critic bind(const ParameterStore& store, const std::string& name);
};

Var critic_value(const Critic& critic, const Var& state);

}  // namespace cdcp::nn

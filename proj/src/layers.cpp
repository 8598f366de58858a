#include "cdcp/layers.hpp"

#include <cmath>
#include <vector>

#include "cdcp/errors.hpp"

namespace cdcp::nn {

Linear Linear::create(ParameterStore& store, const std::string& name, int in, int out, bool with_bias, Rng& rng) {
  Linear layer;
  layer.weight = store.add_uniform(name + ".weight", in, out, in, rng);
  if (with_bias) layer.bias = store.add_uniform(name + ".bias", 1, out, in, rng);
  return layer;
}

Linear Linear::bind(const ParameterStore& store, const std::string& name, bool with_bias) {
  Linear layer;
  layer.weight = store.get(name + ".weight");
  if (with_bias) layer.bias = store.get(name + ".bias");
  return layer;
}

Var linear(const Linear& layer, const Var& x) {
  Var out = ad::matmul(x, layer.weight);
  return layer.bias.defined() ? ad::add_row_broadcast(out, layer.bias) : out;
}

MhaLayer MhaLayer::create(ParameterStore& store, const std::string& name, int width, int heads, Rng& rng) {
  if (heads < 1 || width % heads != 0) throw ParameterError("mha: width must be divisible by head count");
  MhaLayer layer;
  layer.heads = heads;
  layer.width = width;
  layer.wq = store.add_uniform(name + ".wq", width, width, width, rng);
  layer.wk = store.add_uniform(name + ".wk", width, width, width, rng);
  layer.wv = store.add_uniform(name + ".wv", width, width, width, rng);
  layer.wo = store.add_uniform(name + ".wo", width, width, width, rng);
  return layer;
}

MhaLayer MhaLayer::bind(const ParameterStore& store, const std::string& name, int width, int heads) {
  if (heads < 1 || width % heads != 0) throw ParameterError("mha: width must be divisible by head count");
  MhaLayer layer;
  layer.heads = heads;
  layer.width = width;
  layer.wq = store.get(name + ".wq");
  layer.wk = store.get(name + ".wk");
  layer.wv = store.get(name + ".wv");
  layer.wo = store.get(name + ".wo");
  return layer;
}

Var mha_heads(const MhaLayer& layer, const Var& queries, const Var& keys, const Var& values, const Mask& key_mask) {
  if (queries.cols() != layer.width || keys.cols() != layer.width || values.cols() != layer.width) {
    throw ShapeError("mha: input width differs from layer width");
  }
  if (keys.rows() != values.rows()) throw ShapeError("mha: keys and values differ in length");
  const Var q = ad::matmul(queries, layer.wq);
  const Var k = ad::matmul(keys, layer.wk);
  const Var v = ad::matmul(values, layer.wv);
  const int dk = layer.head_width();
  const Real norm = 1.0 / std::sqrt(static_cast<Real>(dk));
  std::vector<Var> heads;
  heads.reserve(layer.heads);
  for (int h = 0; h < layer.heads; ++h) {
    const Var qh = ad::slice_cols(q, h * dk, dk);
    const Var kh = ad::slice_cols(k, h * dk, dk);
    const Var vh = ad::slice_cols(v, h * dk, dk);
    const Var weights = ad::masked_softmax(ad::scale(ad::matmul_nt(qh, kh), norm), key_mask);
    heads.push_back(ad::matmul(weights, vh));
  }
  return ad::concat_cols(heads);
}

Var mha(const MhaLayer& layer, const Var& queries, const Var& keys, const Var& values, const Mask& key_mask) {
  return ad::matmul(mha_heads(layer, queries, keys, values, key_mask), layer.wo);
}

Var skip_connect(const Var& x, const Var& sublayer_out) {
  if (x.rows() != sublayer_out.rows() || x.cols() != sublayer_out.cols()) {
    throw ShapeError("skip_connect: shape mismatch");
  }
  return ad::add(x, sublayer_out);
}

EgateLayer EgateLayer::create(ParameterStore& store, const std::string& name, int node_width, int edge_width,
                              Rng& rng) {
  EgateLayer layer;
  layer.node_width = node_width;
  layer.edge_width = edge_width;
  layer.w_node = store.add_uniform(name + ".w_node", node_width, node_width, node_width, rng);
  layer.w_edge = store.add_uniform(name + ".w_edge", edge_width, node_width, edge_width, rng);
  layer.a_src = store.add_uniform(name + ".a_src", node_width, 1, 3 * node_width, rng);
  layer.a_dst = store.add_uniform(name + ".a_dst", node_width, 1, 3 * node_width, rng);
  layer.a_edge = store.add_uniform(name + ".a_edge", node_width, 1, 3 * node_width, rng);
  return layer;
}

EgateLayer EgateLayer::bind(const ParameterStore& store, const std::string& name, int node_width, int edge_width) {
  EgateLayer layer;
  layer.node_width = node_width;
  layer.edge_width = edge_width;
  layer.w_node = store.get(name + ".w_node");
  layer.w_edge = store.get(name + ".w_edge");
  layer.a_src = store.get(name + ".a_src");
  layer.a_dst = store.get(name + ".a_dst");
  layer.a_edge = store.get(name + ".a_edge");
  return layer;
}

Var egate_forward(const EgateLayer& layer, const Var& nodes, const Var& edges, const Mask& mask) {
  const Eigen::Index n = nodes.rows();
  if (nodes.cols() != layer.node_width) throw ShapeError("egate: node width mismatch");
  if (edges.rows() != n * n || edges.cols() != layer.edge_width) throw ShapeError("egate: edge tensor shape mismatch");
  if (mask.rows() != n || mask.cols() != n) throw ShapeError("egate: mask must be n x n");

  const Var wh = ad::matmul(nodes, layer.w_node);
  const Var we = ad::matmul(edges, layer.w_edge);
  const Var src = ad::matmul(wh, layer.a_src);                   // n x 1
  const Var dst = ad::transpose(ad::matmul(wh, layer.a_dst));    // 1 x n
  const Var pair = ad::reshape(ad::matmul(we, layer.a_edge), n, n);
  const Var logits = ad::leaky_relu(ad::add_row_broadcast(ad::add_col_broadcast(pair, src), dst), layer.slope);
  const Var alpha = ad::masked_softmax(logits, mask);
  const Var messages = ad::add(ad::matmul(alpha, wh), ad::edge_aggregate(alpha, we));
  return ad::add(nodes, ad::leaky_relu(messages, layer.slope));
}

GruCell GruCell::create(ParameterStore& store, const std::string& name, int input_width, int hidden_width, Rng& rng) {
  GruCell cell;
  cell.input_width = input_width;
  cell.hidden_width = hidden_width;
  auto gate = [&](const std::string& g, Var& w, Var& u, Var& b) {
    w = store.add_uniform(name + ".w_" + g, input_width, hidden_width, hidden_width, rng);
    u = store.add_uniform(name + ".u_" + g, hidden_width, hidden_width, hidden_width, rng);
    b = store.add_uniform(name + ".b_" + g, 1, hidden_width, hidden_width, rng);
  };
  gate("z", cell.w_z, cell.u_z, cell.b_z);
  gate("r", cell.w_r, cell.u_r, cell.b_r);
  gate("n", cell.w_n, cell.u_n, cell.b_n);
  return cell;
}

GruCell GruCell::bind(const ParameterStore& store, const std::string& name, int input_width, int hidden_width) {
  GruCell cell;
  cell.input_width = input_width;
  cell.hidden_width = hidden_width;
  auto gate = [&](const std::string& g, Var& w, Var& u, Var& b) {
    w = store.get(name + ".w_" + g);
    u = store.get(name + ".u_" + g);
    b = store.get(name + ".b_" + g);
  };
  gate("z", cell.w_z, cell.u_z, cell.b_z);
  gate("r", cell.w_r, cell.u_r, cell.b_r);
  gate("n", cell.w_n, cell.u_n, cell.b_n);
  return cell;
}

Var gru_step(const GruCell& cell, const Var& input, const Var& hidden) {
  if (input.cols() != cell.input_width || hidden.cols() != cell.hidden_width || input.rows() != hidden.rows()) {
    throw ShapeError("gru_step: input/hidden shape mismatch");
  }
  auto gate_pre = [&](const Var& w, const Var& u, const Var& b, const Var& h) {
    return ad::add_row_broadcast(ad::add(ad::matmul(input, w), ad::matmul(h, u)), b);
  };
  const Var z = ad::sigmoid(gate_pre(cell.w_z, cell.u_z, cell.b_z, hidden));
  const Var r = ad::sigmoid(gate_pre(cell.w_r, cell.u_r, cell.b_r, hidden));
  const Var candidate = ad::tanh(gate_pre(cell.w_n, cell.u_n, cell.b_n, ad::mul(r, hidden)));
  // (1 - z) * candidate + z * hidden
  return ad::add(candidate, ad::mul(z, ad::sub(hidden, candidate)));
}

Critic Critic::create(ParameterStore& store, const std::string& name, int in, int hidden_width, Rng& rng) {
  return {Linear::create(store, name + ".hidden", in, hidden_width, true, rng),
          Linear::create(store, name + ".out", hidden_width, 1, true, rng)};
}

Critic Critic::bind(const ParameterStore& store, const std::string& name) {
  return {Linear::bind(store, name + ".hidden", true), Linear::bind(store, name + ".out", true)};
}

Var critic_value(const Critic& critic, const Var& state) {
  return linear(critic.out, ad::relu(linear(critic.hidden, state)));
}

}  // namespace cdcp::nn

#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "whends/autodiff.hpp"
#include "whends/graph.hpp"

namespace whends {

inline constexpr double kDivGuard = 1e-8;  // normalizer underflow guard

struct SageLayerParams {
  Param self_weight;
  Param neighbor_weight;
};

// Two-layer GraphSAGE block: ReLU after layer 1, identity after layer 2.
struct SageGnn {
  SageLayerParams l1;
  SageLayerParams l2;

  static SageGnn init(const std::string& name, int d_in, int d_out, Rng& rng) {
    SageGnn g;
    g.l1.self_weight = Param(name + ".l1.self", glorot_init(d_in, d_out, rng));
    g.l1.neighbor_weight = Param(name + ".l1.neigh", glorot_init(d_in, d_out, rng));
    g.l2.self_weight = Param(name + ".l2.self", glorot_init(d_out, d_out, rng));
    g.l2.neighbor_weight = Param(name + ".l2.neigh", glorot_init(d_out, d_out, rng));
    return g;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&l1.self_weight);
    out.push_back(&l1.neighbor_weight);
    out.push_back(&l2.self_weight);
    out.push_back(&l2.neighbor_weight);
  }
};

struct MlpParams {
  Param w1, b1, w2, b2;

  static MlpParams init(const std::string& name, int d_in, int d_hidden, int d_out, Rng& rng) {
    MlpParams m;
    m.w1 = Param(name + ".w1", glorot_init(d_in, d_hidden, rng));
    m.b1 = Param(name + ".b1", Matrix(1, d_hidden));
    m.w2 = Param(name + ".w2", glorot_init(d_hidden, d_out, rng));
    m.b2 = Param(name + ".b2", Matrix(1, d_out));
    return m;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&w1);
    out.push_back(&b1);
    out.push_back(&w2);
    out.push_back(&b2);
  }
};

// Batched two-layer MLP on row vectors: relu(X W1 + b1) W2 + b2.
inline Var mlp_apply(Tape& tape, MlpParams& mlp, Var x) {
  Var h = tape.relu(tape.add_rowvec(tape.matmul(x, tape.leaf(mlp.w1)), tape.leaf(mlp.b1)));
  return tape.add_rowvec(tape.matmul(h, tape.leaf(mlp.w2)), tape.leaf(mlp.b2));
}

enum Gate { kForget = 0, kInput = 1, kOutput = 2, kCandidate = 3 };

struct EncoderParams {
  int dim_in = 0;
  int dim = 0;
  int neighbor_k = 10;
  bool simple = false;  // plain two-layer GNN, no recurrence

  SageGnn feature_gnn;            // per-node feature projection, no adjacency
  SageGnn gate_x[4], gate_h[4];   // input-side / hidden-side GNN per gate
  MlpParams recon_mlp;            // d -> d -> dim_in

  static EncoderParams init(int d_in, int d, int k, bool simple, Rng& rng) {
    EncoderParams p;
    p.dim_in = d_in;
    p.dim = d;
    p.neighbor_k = k;
    p.simple = simple;
    p.feature_gnn = SageGnn::init("encoder.gnn_x", d_in, d, rng);
    static const char* names[4] = {"f", "i", "o", "z"};
    for (int g = 0; g < 4; ++g) {
      p.gate_x[g] = SageGnn::init(std::string("encoder.gate_") + names[g] + ".x", d, d, rng);
      p.gate_h[g] = SageGnn::init(std::string("encoder.gate_") + names[g] + ".h", d, d, rng);
    }
    p.recon_mlp = MlpParams::init("encoder.recon", d, d, d_in, rng);
    return p;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    feature_gnn.collect(out);
    for (int g = 0; g < 4; ++g) {
      gate_x[g].collect(out);
      gate_h[g].collect(out);
    }
    recon_mlp.collect(out);
    return out;
  }
};

struct EncoderState {
  Matrix h, c, n;

  static EncoderState initial(int n_nodes, int d) {
    EncoderState s;
    s.h = Matrix(n_nodes, d);
    s.c = Matrix(n_nodes, d);
    s.n = Matrix(n_nodes, d, 1.0);  // normalizer must start positive
    return s;
  }
};

// Uniform sample of up to k 1-hop neighbors per node, without replacement
// when the degree exceeds k.
inline std::vector<std::vector<int>> sample_neighbors(const std::vector<std::vector<int>>& adj,
                                                      int k, Rng& rng) {
  std::vector<std::vector<int>> out(adj.size());
  for (std::size_t i = 0; i < adj.size(); ++i) {
    if (static_cast<int>(adj[i].size()) <= k) {
      out[i] = adj[i];
    } else {
      std::vector<int> pool = adj[i];
      for (int j = 0; j < k; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
        std::swap(pool[j], pool[pick(rng)]);
      }
      pool.resize(k);
      out[i] = std::move(pool);
    }
  }
  return out;
}

// One GraphSAGE layer: act(H W_self + mean(sampled neighbors) W_neigh).
inline Var sage_layer(Tape& tape, SageLayerParams& layer, Var h_in,
                      const std::vector<std::vector<int>>& samples, bool relu_act) {
  Var self_term = tape.matmul(h_in, tape.leaf(layer.self_weight));
  Var out = tape.add(self_term, tape.matmul(tape.neighbor_mean(h_in, samples),
                                            tape.leaf(layer.neighbor_weight)));
  return relu_act ? tape.relu(out) : out;
}

inline Var sage_apply(Tape& tape, SageGnn& gnn, Var h_in,
                      const std::vector<std::vector<int>>& samples) {
  Var h1 = sage_layer(tape, gnn.l1, h_in, samples, /*relu_act=*/true);
  return sage_layer(tape, gnn.l2, h1, samples, /*relu_act=*/false);
}

struct EncoderStepVars {
  Var z_node;
  Var h, c, n;
};

// One recurrent step of the graph LSTM with normalizer state. x_raw, the
// previous state, and the neighbor samples are constants on the tape.
inline EncoderStepVars encoder_step(Tape& tape, EncoderParams& p, const Matrix& x_raw,
                                    const std::vector<std::vector<int>>& samples_t,
                                    const std::vector<std::vector<int>>& samples_prev,
                                    const EncoderState& prev) {
  const std::vector<std::vector<int>> empty(x_raw.rows());
  Var x = sage_apply(tape, p.feature_gnn, tape.constant(x_raw), empty);

  if (p.simple) {
    // Structure-only variant: a plain two-layer GNN over the current
    // snapshot, no temporal state.
    Var z = sage_apply(tape, p.gate_x[kCandidate], x, samples_t);
    return {z, z, z, z};
  }

  Var h_prev = tape.constant(prev.h);
  Var c_prev = tape.constant(prev.c);
  Var n_prev = tape.constant(prev.n);
  auto gate_pre = [&](int g) {
    return tape.add(sage_apply(tape, p.gate_x[g], x, samples_t),
                    sage_apply(tape, p.gate_h[g], h_prev, samples_prev));
  };
  Var f = tape.sigmoid(gate_pre(kForget));
  Var i = tape.sigmoid(gate_pre(kInput));
  Var o = tape.sigmoid(gate_pre(kOutput));
  Var z = tape.tanh(gate_pre(kCandidate));
  Var c = tape.add(tape.hadamard(f, c_prev), tape.hadamard(i, z));
  Var n = tape.add(tape.hadamard(f, n_prev), i);
  Var h = tape.hadamard(o, tape.div_guarded(c, n, kDivGuard));
  return {h, h, c, n};
}

// Value-only forward step; advances the recurrent state.
inline Matrix encoder_forward(EncoderParams& p, const Snapshot& snap, const Snapshot* prev_snap,
                              EncoderState& state, std::uint64_t seed) {
  Rng rng = make_rng(seed, /*stream=*/811 + static_cast<std::uint64_t>(snap.index));
  auto samples_t = sample_neighbors(snap.neighbors, p.neighbor_k, rng);
  auto samples_prev =
      prev_snap ? sample_neighbors(prev_snap->neighbors, p.neighbor_k, rng) : samples_t;
  Tape tape;
  EncoderStepVars out = encoder_step(tape, p, snap.features, samples_t, samples_prev, state);
  state.h = tape.value(out.h);
  state.c = tape.value(out.c);
  state.n = tape.value(out.n);
  return tape.value(out.z_node);
}

inline Matrix edge_embed(const Matrix& z_node, const std::vector<std::pair<int, int>>& edges) {
  Matrix out(edges.size(), z_node.cols());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    for (std::size_t k = 0; k < z_node.cols(); ++k) out(e, k) = z_node(i, k) + z_node(j, k);
  }
  return out;
}

struct ReconVars {
  Var x_hat;
  Var a_hat;
};

// X_hat = MLP(Z), A_hat = sigmoid(Z Z^T).
inline ReconVars reconstruct(Tape& tape, EncoderParams& p, Var z_node) {
  Var x_hat = mlp_apply(tape, p.recon_mlp, z_node);
  Var a_hat = tape.sigmoid(tape.matmul(z_node, tape.transpose(z_node)));
  return {x_hat, a_hat};
}

inline Var recon_loss(Tape& tape, const ReconVars& recon, const Matrix& x, const Matrix& a) {
  Var lx = tape.frobenius_sq(tape.sub(recon.x_hat, tape.constant(x)));
  Var la = tape.frobenius_sq(tape.sub(recon.a_hat, tape.constant(a)));
  return tape.add(lx, la);
}

}  // namespace whends

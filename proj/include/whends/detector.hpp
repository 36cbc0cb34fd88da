#pragma once

#include <string>
#include <vector>

#include "whends/encoder.hpp"

namespace whends {

// Anomaly scoring head: f = sigmoid(phi_a(z_tilde) + b) with a two-layer
// MLP phi_a (d -> d -> 1) and a learnable scalar bias.
struct DetectorParams {
  int dim = 0;
  MlpParams mlp;
  Param bias;

  static DetectorParams init(int d, Rng& rng) {
    DetectorParams p;
    p.dim = d;
    p.mlp = MlpParams::init("detector.mlp", d, d, 1, rng);
    p.bias = Param("detector.bias", Matrix(1, 1));
    return p;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    mlp.collect(out);
    out.push_back(&bias);
    return out;
  }
};

// Batched scores for whitened edge embeddings (rows); output is m x 1.
inline Var score_vars(Tape& tape, DetectorParams& p, Var z_rows) {
  return tape.sigmoid(tape.add_scalar(mlp_apply(tape, p.mlp, z_rows), tape.leaf(p.bias)));
}

inline Vec score_rows(DetectorParams& p, const Matrix& z_rows) {
  Tape tape;
  Var s = score_vars(tape, p, tape.constant(z_rows));
  return tape.value(s).to_vec();
}

inline double score(const Vec& z_tilde, DetectorParams& p) {
  Matrix row(1, z_tilde.size());
  for (std::size_t k = 0; k < z_tilde.size(); ++k) row[k] = z_tilde[k];
  return score_rows(p, row)[0];
}

// Summed binary cross-entropy by default; averaging is opt-in.
inline double bce_loss(const Vec& scores, const std::vector<int>& labels, bool average = false) {
  if (scores.size() != labels.size()) throw ShapeMismatch("bce_loss: scores vs labels");
  Tape tape;
  std::vector<double> y(labels.begin(), labels.end());
  Var loss = tape.bce(tape.constant(Matrix::from_vec(scores)), y, average);
  return tape.value(loss)[0];
}

struct ScoredEdge {
  int t = 0;
  int src = 0;
  int dst = 0;
  double score = 0.0;
  int label = -1;  // -1 when ground truth is unknown
};

}  // namespace whends

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "whends/encoder.hpp"
#include "whends/linalg.hpp"

namespace whends {

// Mean and covariance of an edge-embedding population, with the Cholesky
// factor of (sigma + jitter I) cached for flattening and whitening inputs.
struct GaussianStats {
  Vec mu;
  Matrix sigma;
  Matrix chol;

  std::size_t dim() const { return mu.size(); }
};

inline Matrix add_jitter(const Matrix& sigma, double eps = kCovJitter) {
  Matrix out = sigma;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += eps;
  return out;
}

// Row mean and biased covariance (divide by m) of an m x d embedding matrix.
inline GaussianStats edge_stats(const Matrix& embeddings) {
  const std::size_t m = embeddings.rows(), d = embeddings.cols();
  if (m < 2) throw TooFewSamples("edge_stats: need at least 2 samples, got " + std::to_string(m));
  GaussianStats s;
  s.mu.assign(d, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mu[j] += embeddings(i, j);
  for (double& v : s.mu) v /= static_cast<double>(m);
  s.sigma = Matrix(d, d);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double da = embeddings(i, a) - s.mu[a];
      for (std::size_t b = a; b < d; ++b)
        s.sigma(a, b) += da * (embeddings(i, b) - s.mu[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      s.sigma(a, b) /= static_cast<double>(m);
      s.sigma(b, a) = s.sigma(a, b);
    }
  s.chol = cholesky(add_jitter(s.sigma));
  return s;
}

// Single GRU layer weights, stored input-major so that row vectors compose
// as x * W.
struct GruLayer {
  Param w_xz, w_hz, w_xr, w_hr, w_xh, w_hh;

  static GruLayer init(const std::string& name, int d_in, int d_hidden, Rng& rng) {
    GruLayer g;
    g.w_xz = Param(name + ".w_xz", glorot_init(d_in, d_hidden, rng));
    g.w_hz = Param(name + ".w_hz", glorot_init(d_hidden, d_hidden, rng));
    g.w_xr = Param(name + ".w_xr", glorot_init(d_in, d_hidden, rng));
    g.w_hr = Param(name + ".w_hr", glorot_init(d_hidden, d_hidden, rng));
    g.w_xh = Param(name + ".w_xh", glorot_init(d_in, d_hidden, rng));
    g.w_hh = Param(name + ".w_hh", glorot_init(d_hidden, d_hidden, rng));
    return g;
  }

  void collect(std::vector<Param*>& out) {
    out.push_back(&w_xz);
    out.push_back(&w_hz);
    out.push_back(&w_xr);
    out.push_back(&w_hr);
    out.push_back(&w_xh);
    out.push_back(&w_hh);
  }
};

inline std::size_t tri_size(std::size_t d) { return d * (d + 1) / 2; }

struct NsemParams {
  int dim = 0;
  int h_dim = 0;
  MlpParams mlp;      // (d + tri + h_dim) -> (d + tri) -> (d + tri)
  GruLayer gru[2];

  static NsemParams init(int d, int h_dim, Rng& rng) {
    NsemParams p;
    p.dim = d;
    p.h_dim = h_dim;
    const int stats_dim = d + static_cast<int>(tri_size(d));
    p.mlp = MlpParams::init("nsem.mlp", stats_dim + h_dim, stats_dim, stats_dim, rng);
    p.gru[0] = GruLayer::init("nsem.gru1", stats_dim, h_dim, rng);
    p.gru[1] = GruLayer::init("nsem.gru2", h_dim, h_dim, rng);
    return p;
  }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    mlp.collect(out);
    gru[0].collect(out);
    gru[1].collect(out);
    return out;
  }
};

// Hidden state of the two-layer GRU; row vectors, one per layer.
struct NsemState {
  Matrix h[2];

  static NsemState initial(int h_dim) {
    NsemState s;
    s.h[0] = Matrix(1, h_dim);
    s.h[1] = Matrix(1, h_dim);
    return s;
  }

  // Layer-2 hidden state, the summary fed to the deviation MLP.
  const Matrix& top() const { return h[1]; }
};

// GRU input x_s^t: normal mean concatenated with the flattened Cholesky
// factor of the normal covariance.
inline Matrix gru_input(const GaussianStats& stats) {
  Vec flat = flatten_lower(stats.chol);
  Matrix x(1, stats.dim() + flat.size());
  for (std::size_t k = 0; k < stats.dim(); ++k) x[k] = stats.mu[k];
  for (std::size_t k = 0; k < flat.size(); ++k) x[stats.dim() + k] = flat[k];
  return x;
}

// One GRU layer on the tape (standard form, reset gate applied to the
// hidden state inside the candidate).
inline Var gru_layer_step(Tape& tape, GruLayer& gru, Var x, Var h_prev) {
  Var z = tape.sigmoid(tape.add(tape.matmul(x, tape.leaf(gru.w_xz)),
                                tape.matmul(h_prev, tape.leaf(gru.w_hz))));
  Var r = tape.sigmoid(tape.add(tape.matmul(x, tape.leaf(gru.w_xr)),
                                tape.matmul(h_prev, tape.leaf(gru.w_hr))));
  Var cand = tape.tanh(tape.add(tape.matmul(x, tape.leaf(gru.w_xh)),
                                tape.matmul(tape.hadamard(r, h_prev), tape.leaf(gru.w_hh))));
  Var ones = tape.constant(Matrix(1, tape.value(h_prev).cols(), 1.0));
  return tape.add(tape.hadamard(tape.sub(ones, z), h_prev), tape.hadamard(z, cand));
}

struct GruStepVars {
  Var h[2];
};

inline GruStepVars gru_step_vars(Tape& tape, NsemParams& p, Var x, Var h0_prev, Var h1_prev) {
  GruStepVars out;
  out.h[0] = gru_layer_step(tape, p.gru[0], x, h0_prev);
  out.h[1] = gru_layer_step(tape, p.gru[1], out.h[0], h1_prev);
  return out;
}

// Value-only GRU advance.
inline NsemState gru_step(const Matrix& x, const NsemState& prev, NsemParams& p) {
  Tape tape;
  GruStepVars vars = gru_step_vars(tape, p, tape.constant(x), tape.constant(prev.h[0]),
                                   tape.constant(prev.h[1]));
  NsemState next;
  next.h[0] = tape.value(vars.h[0]);
  next.h[1] = tape.value(vars.h[1]);
  return next;
}

struct DeviationVars {
  Var delta_mu;      // 1 x d
  Var delta_l;       // d x d lower-triangular
};

// MLP consumes mu_all ++ flatten(chol(Sigma_all)) ++ h_s and splits its
// output into the mean deviation and the Cholesky-factor deviation.
inline DeviationVars predict_deviation_vars(Tape& tape, NsemParams& p,
                                            const GaussianStats& stats_all, Var h_s) {
  const std::size_t d = stats_all.dim();
  if (static_cast<int>(d) != p.dim) throw ShapeMismatch("predict_deviation: stats dim");
  Var input = tape.concat({tape.constant(gru_input(stats_all)), h_s});
  Var out = mlp_apply(tape, p.mlp, input);
  DeviationVars dev;
  dev.delta_mu = tape.slice(out, 0, d);
  dev.delta_l = tape.unflatten_lower(tape.slice(out, d, tri_size(d)), d);
  return dev;
}

inline std::pair<Vec, Matrix> predict_deviation(const GaussianStats& stats_all,
                                                const NsemState& state, NsemParams& p) {
  Tape tape;
  DeviationVars dev = predict_deviation_vars(tape, p, stats_all, tape.constant(state.top()));
  return {tape.value(dev.delta_mu).to_vec(), tape.value(dev.delta_l)};
}

struct RecoveredVars {
  Var mu;     // 1 x d
  Var sigma;  // d x d, PD by construction
};

// mu_hat = mu_all - dmu; Sigma_hat = (L_all - dL)(L_all - dL)^T + jitter I,
// with L_all the Cholesky factor of the overall covariance.
inline RecoveredVars recover_normal_vars(Tape& tape, const GaussianStats& stats_all,
                                         const DeviationVars& dev) {
  RecoveredVars rec;
  rec.mu = tape.sub(tape.constant(transpose(Matrix::from_vec(stats_all.mu))), dev.delta_mu);
  Var l_all = tape.constant(stats_all.chol);
  Var diff = tape.sub(l_all, dev.delta_l);
  rec.sigma = tape.add_diag(tape.matmul(diff, tape.transpose(diff)), kCovJitter);
  return rec;
}

inline GaussianStats recover_normal(const GaussianStats& stats_all, const Vec& delta_mu,
                                    const Matrix& delta_l) {
  GaussianStats out;
  out.mu.resize(stats_all.dim());
  for (std::size_t k = 0; k < out.mu.size(); ++k) out.mu[k] = stats_all.mu[k] - delta_mu[k];
  Matrix diff = sub(stats_all.chol, delta_l);
  out.sigma = add_jitter(matmul(diff, transpose(diff)));
  out.chol = cholesky(add_jitter(out.sigma));
  return out;
}

// z_tilde = Sigma^{-1/2} (z - mu).
inline Vec whiten(const Vec& z, const GaussianStats& stats) {
  const Matrix s = inv_sqrt(stats.sigma);
  Vec centered(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) centered[k] = z[k] - stats.mu[k];
  Vec out(z.size(), 0.0);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) out[i] += s(i, j) * centered[j];
  return out;
}

// Batch whitening of row embeddings with a precomputed symmetric transform.
inline Matrix whiten_rows(const Matrix& rows, const Vec& mu, const Matrix& transform) {
  Matrix centered = rows;
  for (std::size_t i = 0; i < centered.rows(); ++i)
    for (std::size_t j = 0; j < centered.cols(); ++j) centered(i, j) -= mu[j];
  return matmul(centered, transpose(transform));
}

inline Var statistics_loss_vars(Tape& tape, const RecoveredVars& rec,
                                const GaussianStats& truth) {
  Var lmu = tape.frobenius_sq(
      tape.sub(rec.mu, tape.constant(transpose(Matrix::from_vec(truth.mu)))));
  Var lsigma = tape.frobenius_sq(tape.sub(rec.sigma, tape.constant(truth.sigma)));
  return tape.add(lmu, lsigma);
}

inline double statistics_loss(const GaussianStats& pred, const GaussianStats& truth) {
  if (pred.dim() != truth.dim()) throw ShapeMismatch("statistics_loss: dim");
  double l = 0.0;
  for (std::size_t k = 0; k < pred.mu.size(); ++k) {
    const double d = pred.mu[k] - truth.mu[k];
    l += d * d;
  }
  const Matrix d = sub(pred.sigma, truth.sigma);
  const double f = frobenius_norm(d);
  return l + f * f;
}

}  // namespace whends

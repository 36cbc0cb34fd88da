#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "whends/matrix.hpp"

namespace whends {

// Learnable tensor with its gradient accumulator and Adam moment buffers.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  Param() = default;
  Param(std::string n, Matrix v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.rows(), value.cols()),
        adam_m(value.rows(), value.cols()),
        adam_v(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

// Handle into a Tape node.
struct Var {
  int id = -1;
};

// Reverse-mode tape over dense matrices. Nodes are recorded in topological
// order by construction; backward() walks them in reverse and accumulates
// adjoints additively. A tape is confined to one thread.
class Tape {
 public:
  Var constant(Matrix m) { return push(std::move(m), nullptr); }

  Var constant_vec(const Vec& v) { return constant(Matrix::from_vec(v)); }

  Var leaf(Param& p) {
    Param* pp = &p;
    Var out = push(p.value, [this, pp](Var self) {
      Matrix& g = grad(self);
      for (std::size_t k = 0; k < g.size(); ++k) pp->grad[k] += g[k];
    });
    return out;
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }

  Matrix& grad(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var matmul(Var a, Var b) {
    Matrix out = whends::matmul(value(a), value(b));
    return push(std::move(out), [this, a, b](Var self) {
      const Matrix& g = grad(self);
      accumulate(a, whends::matmul(g, whends::transpose(value(b))));
      accumulate(b, whends::matmul(whends::transpose(value(a)), g));
    });
  }

  Var add(Var a, Var b) {
    Matrix out = whends::add(value(a), value(b));
    return push(std::move(out), [this, a, b](Var self) {
      const Matrix& g = grad(self);
      accumulate(a, g);
      accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    Matrix out = whends::sub(value(a), value(b));
    return push(std::move(out), [this, a, b](Var self) {
      const Matrix& g = grad(self);
      accumulate(a, g);
      accumulate(b, whends::scale(g, -1.0));
    });
  }

  Var hadamard(Var a, Var b) {
    require_same_shape(value(a), value(b), "hadamard");
    Matrix out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= value(b)[k];
    return push(std::move(out), [this, a, b](Var self) {
      const Matrix& g = grad(self);
      Matrix ga = g, gb = g;
      for (std::size_t k = 0; k < g.size(); ++k) {
        ga[k] *= value(b)[k];
        gb[k] *= value(a)[k];
      }
      accumulate(a, ga);
      accumulate(b, gb);
    });
  }

  Var scalar_mul(Var a, double s) {
    Matrix out = whends::scale(value(a), s);
    return push(std::move(out), [this, a, s](Var self) {
      accumulate(a, whends::scale(grad(self), s));
    });
  }

  Var sigmoid(Var a) {
    Matrix out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 1.0 / (1.0 + std::exp(-out[k]));
    return push(std::move(out), [this, a](Var self) {
      const Matrix& y = value(self);
      Matrix g = grad(self);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= y[k] * (1.0 - y[k]);
      accumulate(a, g);
    });
  }

  Var tanh(Var a) {
    Matrix out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::tanh(out[k]);
    return push(std::move(out), [this, a](Var self) {
      const Matrix& y = value(self);
      Matrix g = grad(self);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] *= 1.0 - y[k] * y[k];
      accumulate(a, g);
    });
  }

  Var relu(Var a) {
    Matrix out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = out[k] > 0.0 ? out[k] : 0.0;
    return push(std::move(out), [this, a](Var self) {
      Matrix g = grad(self);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (value(a)[k] <= 0.0) g[k] = 0.0;
      accumulate(a, g);
    });
  }

  // Elementwise a / max(b, eps). The clamp also gates the adjoint of b.
  Var div_guarded(Var a, Var b, double eps) {
    require_same_shape(value(a), value(b), "div_guarded");
    Matrix out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] /= std::max(value(b)[k], eps);
    return push(std::move(out), [this, a, b, eps](Var self) {
      const Matrix& g = grad(self);
      Matrix ga = g, gb = g;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double den = std::max(value(b)[k], eps);
        ga[k] /= den;
        gb[k] = value(b)[k] > eps ? -g[k] * value(a)[k] / (den * den) : 0.0;
      }
      accumulate(a, ga);
      accumulate(b, gb);
    });
  }

  Var transpose(Var a) {
    Matrix out = whends::transpose(value(a));
    return push(std::move(out), [this, a](Var self) {
      accumulate(a, whends::transpose(grad(self)));
    });
  }

  // Broadcasts a 1 x c bias over every row of an n x c matrix.
  Var add_rowvec(Var m, Var bias) {
    const Matrix& b = value(bias);
    if (b.rows() != 1 || b.cols() != value(m).cols())
      throw ShapeMismatch("add_rowvec: bias shape");
    Matrix out = value(m);
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b(0, j);
    return push(std::move(out), [this, m, bias](Var self) {
      const Matrix& g = grad(self);
      accumulate(m, g);
      Matrix gb(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
      accumulate(bias, gb);
    });
  }

  // Adds a 1x1 scalar node to every entry.
  Var add_scalar(Var m, Var s) {
    if (value(s).size() != 1) throw ShapeMismatch("add_scalar: scalar node expected");
    Matrix out = value(m);
    const double sv = value(s)[0];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += sv;
    return push(std::move(out), [this, m, s](Var self) {
      const Matrix& g = grad(self);
      accumulate(m, g);
      Matrix gs(1, 1);
      for (std::size_t k = 0; k < g.size(); ++k) gs[0] += g[k];
      accumulate(s, gs);
    });
  }

  // Per-row mean of sampled neighbor rows; rows with an empty sample list get
  // a zero row. `samples` is captured by value and treated as a constant.
  Var neighbor_mean(Var h, std::vector<std::vector<int>> samples) {
    const Matrix& hv = value(h);
    if (samples.size() != hv.rows()) throw ShapeMismatch("neighbor_mean: sample list size");
    Matrix out(hv.rows(), hv.cols());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].empty()) continue;
      const double inv = 1.0 / static_cast<double>(samples[i].size());
      for (int nb : samples[i])
        for (std::size_t j = 0; j < hv.cols(); ++j) out(i, j) += inv * hv(nb, j);
    }
    return push(std::move(out), [this, h, samples = std::move(samples)](Var self) {
      const Matrix& g = grad(self);
      Matrix gh(g.rows(), g.cols());
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].empty()) continue;
        const double inv = 1.0 / static_cast<double>(samples[i].size());
        for (int nb : samples[i])
          for (std::size_t j = 0; j < g.cols(); ++j) gh(nb, j) += inv * g(i, j);
      }
      accumulate(h, gh);
    });
  }

  // Edge embedding rows z_i + z_j for each (i, j) in `edges`.
  Var edge_sum(Var z, std::vector<std::pair<int, int>> edges) {
    const Matrix& zv = value(z);
    Matrix out(edges.size(), zv.cols());
    for (std::size_t e = 0; e < edges.size(); ++e)
      for (std::size_t j = 0; j < zv.cols(); ++j)
        out(e, j) = zv(edges[e].first, j) + zv(edges[e].second, j);
    return push(std::move(out), [this, z, edges = std::move(edges)](Var self) {
      const Matrix& g = grad(self);
      Matrix gz(value(z).rows(), value(z).cols());
      for (std::size_t e = 0; e < edges.size(); ++e)
        for (std::size_t j = 0; j < g.cols(); ++j) {
          gz(edges[e].first, j) += g(e, j);
          gz(edges[e].second, j) += g(e, j);
        }
      accumulate(z, gz);
    });
  }

  // Flat concatenation; produces a 1 x total row vector.
  Var concat(const std::vector<Var>& parts) {
    std::size_t total = 0;
    for (Var p : parts) total += value(p).size();
    Matrix out(1, total);
    std::size_t at = 0;
    for (Var p : parts)
      for (std::size_t k = 0; k < value(p).size(); ++k) out[at++] = value(p)[k];
    return push(std::move(out), [this, parts](Var self) {
      const Matrix& g = grad(self);
      std::size_t at = 0;
      for (Var p : parts) {
        Matrix gp(value(p).rows(), value(p).cols());
        for (std::size_t k = 0; k < gp.size(); ++k) gp[k] = g[at++];
        accumulate(p, gp);
      }
    });
  }

  // Contiguous flat slice [start, start+len); produces a 1 x len row vector.
  Var slice(Var a, std::size_t start, std::size_t len) {
    if (start + len > value(a).size()) throw ShapeMismatch("slice: out of range");
    Matrix out(1, len);
    for (std::size_t k = 0; k < len; ++k) out[k] = value(a)[start + k];
    return push(std::move(out), [this, a, start, len](Var self) {
      const Matrix& g = grad(self);
      Matrix ga(value(a).rows(), value(a).cols());
      for (std::size_t k = 0; k < len; ++k) ga[start + k] = g[k];
      accumulate(a, ga);
    });
  }

  // Scatters a flat length d(d+1)/2 vector into the lower triangle of a
  // d x d matrix (row-major triangle order).
  Var unflatten_lower(Var flat, std::size_t d) {
    if (value(flat).size() != d * (d + 1) / 2)
      throw ShapeMismatch("unflatten_lower: flat length");
    Matrix out(d, d);
    std::size_t k = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) out(i, j) = value(flat)[k++];
    return push(std::move(out), [this, flat, d](Var self) {
      const Matrix& g = grad(self);
      Matrix gf(value(flat).rows(), value(flat).cols());
      std::size_t k = 0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j <= i; ++j) gf[k++] = g(i, j);
      accumulate(flat, gf);
    });
  }

  Var add_diag(Var a, double eps) {
    if (value(a).rows() != value(a).cols()) throw ShapeMismatch("add_diag: square expected");
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += eps;
    return push(std::move(out), [this, a](Var self) { accumulate(a, grad(self)); });
  }

  // 1 x c row of column means.
  Var mean_rows(Var a) {
    const Matrix& av = value(a);
    Matrix out(1, av.cols());
    const double inv = 1.0 / static_cast<double>(av.rows());
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += inv * av(i, j);
    return push(std::move(out), [this, a](Var self) {
      const Matrix& g = grad(self);
      const double inv = 1.0 / static_cast<double>(value(a).rows());
      Matrix ga(value(a).rows(), value(a).cols());
      for (std::size_t i = 0; i < ga.rows(); ++i)
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) = inv * g(0, j);
      accumulate(a, ga);
    });
  }

  // Scalar sum of squared entries; doubles as ||.||_2^2 on vectors.
  Var frobenius_sq(Var a) {
    double s = 0.0;
    for (std::size_t k = 0; k < value(a).size(); ++k) s += value(a)[k] * value(a)[k];
    Matrix out(1, 1);
    out[0] = s;
    return push(std::move(out), [this, a](Var self) {
      const double g = grad(self)[0];
      accumulate(a, whends::scale(value(a), 2.0 * g));
    });
  }

  // Binary cross-entropy against constant labels, summed (or averaged) over
  // the batch. Scores are clamped to [1e-7, 1 - 1e-7] before the logs.
  Var bce(Var scores, std::vector<double> labels, bool average = false) {
    const Matrix& s = value(scores);
    if (s.size() != labels.size()) throw ShapeMismatch("bce: scores vs labels");
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    double loss = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] < 0.0 || s[k] > 1.0) throw DomainError("bce: score outside [0,1]");
      const double f = std::clamp(s[k], lo, hi);
      loss -= (1.0 - labels[k]) * std::log(1.0 - f) + labels[k] * std::log(f);
    }
    const double norm = average ? 1.0 / static_cast<double>(labels.size()) : 1.0;
    Matrix out(1, 1);
    out[0] = loss * norm;
    return push(std::move(out),
                [this, scores, labels = std::move(labels), norm](Var self) {
      constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
      const double g = grad(self)[0] * norm;
      const Matrix& s = value(scores);
      Matrix gs(s.rows(), s.cols());
      for (std::size_t k = 0; k < s.size(); ++k) {
        const double f = std::clamp(s[k], lo, hi);
        gs[k] = g * (f - labels[k]) / (f * (1.0 - f));
      }
      accumulate(scores, gs);
    });
  }

  // Backpropagates from a scalar loss node into every Param leaf on the tape.
  void backward(Var loss) {
    if (value(loss).size() != 1) throw ShapeMismatch("backward: loss must be scalar");
    grad(loss)[0] += 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[i].back && !nodes_[i].grad.empty()) nodes_[i].back(Var{i});
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Var)> back;
  };

  Var push(Matrix value, std::function<void(Var)> back) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(Var v, const Matrix& g) {
    Matrix& dst = grad(v);
    require_same_shape(dst, g, "accumulate");
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += g[k];
  }

  std::vector<Node> nodes_;
};

// Adam with bias correction; step() consumes and zeroes the gradients.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;

  explicit Adam(double learning_rate = 1e-3) : lr(learning_rate) {}

  void step(const std::vector<Param*>& params) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (Param* p : params) {
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        const double g = p->grad[k];
        p->adam_m[k] = beta1 * p->adam_m[k] + (1.0 - beta1) * g;
        p->adam_v[k] = beta2 * p->adam_v[k] + (1.0 - beta2) * g * g;
        const double mhat = p->adam_m[k] / bc1;
        const double vhat = p->adam_v[k] / bc2;
        p->value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      p->zero_grad();
    }
  }
};

// Glorot-style uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = dist(rng);
  return m;
}

}  // namespace whends

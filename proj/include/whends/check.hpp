#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "whends/eval.hpp"

namespace whends {

// Fast self-check suite behind the `check` CLI subcommand. Each check is
// independent; the hook lets tests force a failure path.
struct CheckOptions {
  bool corrupt_whitening = false;  // test hook: perturbs the whitening transform
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Matrix random_spd(int d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(d, d);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = g(rng);
  Matrix spd = matmul(a, transpose(a));
  for (int i = 0; i < d; ++i) spd(i, i) += 0.5;
  return spd;
}

}  // namespace detail

inline std::vector<CheckResult> run_checks(const CheckOptions& opt = {}) {
  std::vector<CheckResult> results;
  auto check = [&](const std::string& name, const std::function<std::string()>& fn) {
    CheckResult r;
    r.name = name;
    try {
      r.detail = fn();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = e.what();
    }
    results.push_back(std::move(r));
  };

  check("cholesky_reconstruction", [] {
    Rng rng = make_rng(42, 1);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 2 + trial;
      Matrix spd = detail::random_spd(d, rng);
      Matrix l = cholesky(spd);
      if (max_abs_diff(matmul(l, transpose(l)), spd) > 1e-10)
        return std::string("reconstruction error above 1e-10 at d=") + std::to_string(d);
    }
    return std::string();
  });

  check("whitening_moments", [&] {
    Rng rng = make_rng(42, 2);
    const int d = 8, m = 10000;
    Matrix spd = detail::random_spd(d, rng);
    Matrix l = cholesky(spd);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix samples(m, d);
    for (int i = 0; i < m; ++i) {
      Vec u(d);
      for (double& v : u) v = g(rng);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b <= a; ++b) samples(i, a) += l(a, b) * u[b];
    }
    GaussianStats stats = edge_stats(samples);
    Matrix transform = inv_sqrt(stats.sigma);
    if (opt.corrupt_whitening) transform(0, 0) += 0.5;
    Matrix white = whiten_rows(samples, stats.mu, transform);
    GaussianStats wstats = edge_stats(white);
    for (double v : wstats.mu)
      if (std::abs(v) > 1e-10) return std::string("whitened mean above 1e-10");
    Matrix dev = sub(wstats.sigma, Matrix::identity(d));
    if (max_abs(dev) > 1e-6) return std::string("whitened covariance deviates from identity");
    return std::string();
  });

  check("gradient_spot_check", [] {
    Rng rng = make_rng(42, 3);
    std::normal_distribution<double> g(0.0, 1.0);
    Param w("w", glorot_init(4, 3, rng));
    Matrix x(2, 4);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = g(rng);
    auto loss_value = [&] {
      Tape tape;
      Var out = tape.frobenius_sq(tape.sigmoid(tape.matmul(tape.constant(x), tape.leaf(w))));
      return tape.value(out)[0];
    };
    {
      Tape tape;
      Var out = tape.frobenius_sq(tape.sigmoid(tape.matmul(tape.constant(x), tape.leaf(w))));
      tape.backward(out);
    }
    const double h = 1e-5;
    for (std::size_t k = 0; k < w.value.size(); ++k) {
      const double orig = w.value[k];
      w.value[k] = orig + h;
      const double up = loss_value();
      w.value[k] = orig - h;
      const double down = loss_value();
      w.value[k] = orig;
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - w.grad[k]) / std::max(1.0, std::abs(fd));
      if (rel > 1e-4) return std::string("gradient mismatch vs finite differences");
    }
    return std::string();
  });

  check("auc_oracle", [] {
    Rng rng = make_rng(42, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    std::uniform_int_distribution<int> level(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> scores;
      std::vector<int> labels;
      bool pos = false, neg = false;
      for (int i = 0; i < 40; ++i) {
        scores.push_back(trial % 2 ? level(rng) * 0.25 : u(rng));  // include heavy ties
        labels.push_back(coin(rng));
        (labels.back() ? pos : neg) = true;
      }
      if (!pos || !neg) continue;
      double wins = 0.0;
      std::size_t pairs = 0;
      for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j) {
          if (labels[i] != 1 || labels[j] != 0) continue;
          ++pairs;
          if (scores[i] > scores[j]) wins += 1.0;
          else if (scores[i] == scores[j]) wins += 0.5;
        }
      const double brute = wins / static_cast<double>(pairs);
      if (std::abs(auc_roc(scores, labels) - brute) > 1e-12)
        return std::string("rank AUC differs from pair counting");
    }
    return std::string();
  });

  return results;
}

// Prints one pass/fail line per check; returns true iff all passed.
inline bool print_checks(const std::vector<CheckResult>& results, std::ostream& out) {
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS" : "FAIL") << " " << r.name;
    if (!r.passed) out << " (" << r.detail << ")";
    out << "\n";
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace whends

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "whends/matrix.hpp"

namespace whends {

struct EdgeEvent {
  int src = 0;
  int dst = 0;
  long time = 0;
};

namespace detail {
inline std::uint64_t pair_key(int a, int b, int n) {
  if (a > b) std::swap(a, b);
  return static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(n) +
         static_cast<std::uint64_t>(b);
}
}  // namespace detail

// One graph snapshot: a block of consecutive edge events over the shared
// node universe, with per-node features and optional per-edge anomaly labels.
struct Snapshot {
  int index = 0;
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;  // empty when unlabeled; else one 0/1 per edge
  Matrix features;          // N x d
  std::vector<std::vector<int>> neighbors;     // symmetric, deduped, no self-loops
  std::unordered_set<std::uint64_t> edge_set;  // undirected pair keys

  bool has_edge(int a, int b) const {
    return edge_set.count(detail::pair_key(a, b, n_nodes)) > 0;
  }

  void rebuild_adjacency() {
    neighbors.assign(n_nodes, {});
    edge_set.clear();
    for (auto [s, d] : edges) {
      const auto key = detail::pair_key(s, d, n_nodes);
      if (edge_set.insert(key).second) {
        neighbors[s].push_back(d);
        neighbors[d].push_back(s);
      }
    }
  }

  Matrix dense_adjacency() const {
    Matrix a(n_nodes, n_nodes);
    for (int i = 0; i < n_nodes; ++i)
      for (int nb : neighbors[i]) a(i, nb) = 1.0;
    return a;
  }
};

struct SnapshotSequence {
  std::vector<Snapshot> snapshots;
  int train_count = 0;
  int n_nodes = 0;
  int dim = 0;
};

struct SplitConfig {
  int snapshot_size = 1000;
  double train_ratio = 0.5;
  std::uint64_t seed = 1;
};

// Pseudo-labeled edge batch produced by negative sampling: the snapshot's
// original edges (label 0) followed by fabricated non-edges (label 1).
struct EdgeBatch {
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;
};

// Parses "src dst [weight] [timestamp]" lines with whitespace or comma
// separators. Node ids are remapped to dense 0-based ids in order of first
// appearance; self-loops are dropped; duplicates are kept.
inline std::vector<EdgeEvent> parse_edge_list(std::istream& in) {
  std::vector<EdgeEvent> events;
  std::unordered_map<long, int> remap;
  std::string line;
  long line_no = 0;
  long ordinal = 0;
  auto dense_id = [&](long raw) {
    auto [it, inserted] = remap.emplace(raw, static_cast<int>(remap.size()));
    return it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    long a, b;
    if (!(ls >> a)) {
      // blank or comment line
      std::istringstream probe(line);
      std::string tok;
      if (!(probe >> tok) || tok[0] == '#' || tok[0] == '%') continue;
      throw ParseError("line " + std::to_string(line_no) + ": expected integer node id");
    }
    if (!(ls >> b))
      throw ParseError("line " + std::to_string(line_no) + ": missing destination node");
    if (a == b) continue;
    events.push_back({dense_id(a), dense_id(b), ordinal++});
  }
  if (events.empty()) throw EmptyInput("edge list contains no events");
  return events;
}

inline int count_nodes(const std::vector<EdgeEvent>& events) {
  int n = 0;
  for (const auto& e : events) n = std::max({n, e.src + 1, e.dst + 1});
  return n;
}

// Consecutive blocks of snapshot_size events; the final partial block is
// kept. K = floor(train_ratio * #snapshots), clamped to [1, #snapshots - 1].
inline SnapshotSequence build_snapshots(const std::vector<EdgeEvent>& events,
                                        const SplitConfig& cfg) {
  if (events.empty()) throw EmptyInput("build_snapshots: no events");
  if (cfg.snapshot_size < 1) throw ConfigError("snapshot_size must be >= 1");
  if (cfg.train_ratio <= 0.0 || cfg.train_ratio >= 1.0)
    throw ConfigError("train_ratio must be in (0, 1)");
  SnapshotSequence seq;
  seq.n_nodes = count_nodes(events);
  const int total = static_cast<int>((events.size() + cfg.snapshot_size - 1) / cfg.snapshot_size);
  if (total < 2) throw TooFewEvents("need at least 2 snapshots, got " + std::to_string(total));
  for (int t = 0; t < total; ++t) {
    Snapshot snap;
    snap.index = t;
    snap.n_nodes = seq.n_nodes;
    const std::size_t lo = static_cast<std::size_t>(t) * cfg.snapshot_size;
    const std::size_t hi = std::min(events.size(), lo + cfg.snapshot_size);
    for (std::size_t k = lo; k < hi; ++k) snap.edges.emplace_back(events[k].src, events[k].dst);
    snap.rebuild_adjacency();
    seq.snapshots.push_back(std::move(snap));
  }
  seq.train_count = std::clamp(static_cast<int>(std::floor(cfg.train_ratio * total)), 1, total - 1);
  return seq;
}

// Deterministic seeded Gaussian rows scaled to unit L2 norm.
inline Matrix init_features(int n, int d, std::uint64_t seed) {
  Rng rng = make_rng(seed, /*stream=*/101);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix x(n, d);
  for (int i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (int j = 0; j < d; ++j) {
      x(i, j) = dist(rng);
      norm_sq += x(i, j) * x(i, j);
    }
    const double inv = 1.0 / std::max(std::sqrt(norm_sq), 1e-300);
    for (int j = 0; j < d; ++j) x(i, j) *= inv;
  }
  return x;
}

// Loads externally precomputed per-node features: one node per line, d
// whitespace-separated floats.
inline Matrix load_features(const std::string& path, int n, int d) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file: " + path);
  Matrix x(n, d);
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n) throw ParseError("feature file has more rows than nodes");
    std::istringstream ls(line);
    for (int j = 0; j < d; ++j)
      if (!(ls >> x(row, j)))
        throw ParseError("feature file row " + std::to_string(row) + ": expected " +
                         std::to_string(d) + " values");
    ++row;
  }
  if (row != n)
    throw ParseError("feature file has " + std::to_string(row) + " rows, expected " +
                     std::to_string(n));
  return x;
}

namespace detail {

// Draws `count` distinct non-edges, optionally restricted to cross-pairs of
// a node predicate partition. Throws SaturatedGraph when impossible.
inline std::vector<std::pair<int, int>> sample_non_edges(const Snapshot& snap, std::size_t count,
                                                         Rng& rng) {
  const int n = snap.n_nodes;
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (all_pairs < snap.edge_set.size() + count)
    throw SaturatedGraph("not enough non-edges to sample");
  std::uniform_int_distribution<int> node(0, n - 1);
  std::unordered_set<std::uint64_t> taken;
  std::vector<std::pair<int, int>> out;
  std::size_t tries = 0;
  const std::size_t max_tries = 1000 * (count + 16);
  while (out.size() < count) {
    if (++tries > max_tries) throw SaturatedGraph("non-edge rejection sampling exhausted");
    const int a = node(rng), b = node(rng);
    if (a == b || snap.has_edge(a, b)) continue;
    const auto key = pair_key(a, b, n);
    if (!taken.insert(key).second) continue;
    out.emplace_back(a, b);
  }
  return out;
}

}  // namespace detail

// Adds ceil(ratio * |E|) uniformly sampled non-edges labeled 1; originals
// get label 0.
inline Snapshot inject_anomalies(const Snapshot& snap, double ratio, std::uint64_t seed) {
  if (ratio <= 0.0 || ratio > 0.5) throw ConfigError("injection ratio must be in (0, 0.5]");
  Rng rng = make_rng(seed, /*stream=*/211 + static_cast<std::uint64_t>(snap.index));
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(snap.edges.size())));
  Snapshot out = snap;
  out.labels.assign(out.edges.size(), 0);
  for (auto [a, b] : detail::sample_non_edges(snap, count, rng)) {
    out.edges.emplace_back(a, b);
    out.labels.push_back(1);
  }
  out.rebuild_adjacency();
  return out;
}

// Training-time augmentation: alpha drawn uniformly in [0.01, 0.10] per
// call, then injected exactly like test anomalies.
inline Snapshot augment_training(const Snapshot& snap, std::uint64_t seed) {
  Rng rng = make_rng(seed, /*stream=*/307 + static_cast<std::uint64_t>(snap.index));
  std::uniform_real_distribution<double> alpha_dist(0.01, 0.10);
  const double alpha = alpha_dist(rng);
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(snap.edges.size())));
  Snapshot out = snap;
  out.labels.assign(out.edges.size(), 0);
  for (auto [a, b] : detail::sample_non_edges(snap, count, rng)) {
    out.edges.emplace_back(a, b);
    out.labels.push_back(1);
  }
  out.rebuild_adjacency();
  return out;
}

// Emits originals (label 0) plus |E| pseudo-anomalies (label 1). Each pseudo
// anomaly is, with probability 1/2, a uniform non-edge, else a random
// existing edge with its destination replaced so the result is a non-edge.
inline EdgeBatch negative_sample(const Snapshot& snap, std::uint64_t seed) {
  Rng rng = make_rng(seed, /*stream=*/401 + static_cast<std::uint64_t>(snap.index));
  const int n = snap.n_nodes;
  const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  if (all_pairs < 2 * snap.edge_set.size()) throw SaturatedGraph("too few non-edges for negatives");
  EdgeBatch batch;
  batch.edges = snap.edges;
  batch.labels.assign(snap.edges.size(), 0);
  std::uniform_int_distribution<int> node(0, n - 1);
  std::uniform_int_distribution<std::size_t> edge_pick(0, snap.edges.size() - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  std::unordered_set<std::uint64_t> taken;
  std::size_t made = 0, tries = 0;
  const std::size_t max_tries = 1000 * (snap.edges.size() + 16);
  while (made < snap.edges.size()) {
    if (++tries > max_tries) throw SaturatedGraph("negative sampling exhausted");
    int a, b;
    if (coin(rng) == 0) {
      a = node(rng);
      b = node(rng);
    } else {
      a = snap.edges[edge_pick(rng)].first;  // keep source, perturb destination
      b = node(rng);
    }
    if (a == b || snap.has_edge(a, b)) continue;
    if (!taken.insert(detail::pair_key(a, b, n)).second) continue;
    batch.edges.emplace_back(a, b);
    batch.labels.push_back(1);
    ++made;
  }
  return batch;
}

// Random-walk feature drift: snapshot 0 keeps its features; each later
// snapshot's features are the previous snapshot's plus iid N(0, sigma^2).
inline SnapshotSequence nds_perturb(const SnapshotSequence& seq, double sigma,
                                    std::uint64_t seed) {
  if (sigma < 0.0) throw ConfigError("nds sigma must be >= 0");
  SnapshotSequence out = seq;
  if (sigma == 0.0 || out.snapshots.size() < 2) return out;
  Rng rng = make_rng(seed, /*stream=*/503);
  std::normal_distribution<double> dist(0.0, sigma);
  for (std::size_t t = 1; t < out.snapshots.size(); ++t) {
    Matrix x = out.snapshots[t - 1].features;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += dist(rng);
    out.snapshots[t].features = std::move(x);
  }
  return out;
}

struct SynthConfig {
  int n_nodes = 500;
  int n_snapshots = 20;
  int dim = 16;
  double drift_sigma = 0.5;
  double anomaly_ratio = 0.10;
  std::uint64_t seed = 1;
  int edges_per_snapshot = 0;   // 0 => 4 * n_nodes
  double leak_max = 0.02;       // inter-community normal-edge fraction at the last snapshot
  double community_offset = 8.0;
  double feature_scale = 16.0;  // multiplier on the base (pre-offset) feature rows
};

// Two-community benchmark with slowly growing inter-community leak, feature
// drift, and cross-community anomalies injected into the test half.
inline SnapshotSequence synth_nds_benchmark(const SynthConfig& cfg) {
  if (cfg.n_nodes < 20) throw ConfigError("synth benchmark needs n_nodes >= 20");
  if (cfg.n_snapshots < 4) throw ConfigError("synth benchmark needs n_snapshots >= 4");
  const int n = cfg.n_nodes;
  const int half = n / 2;
  const int m = cfg.edges_per_snapshot > 0 ? cfg.edges_per_snapshot : 4 * n;
  Rng rng = make_rng(cfg.seed, /*stream=*/601);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Base features: unit-norm Gaussian rows with a per-community offset along
  // a random direction.
  Matrix x0 = init_features(n, cfg.dim, cfg.seed);
  if (cfg.feature_scale != 1.0)
    for (std::size_t k = 0; k < x0.size(); ++k) x0[k] *= cfg.feature_scale;
  Vec dir(cfg.dim);
  double dn = 0.0;
  for (double& v : dir) {
    v = gauss(rng);
    dn += v * v;
  }
  dn = std::sqrt(dn);
  for (int i = 0; i < n; ++i) {
    const double sign = i < half ? 1.0 : -1.0;
    for (int j = 0; j < cfg.dim; ++j) x0(i, j) += sign * cfg.community_offset * dir[j] / dn;
  }

  SnapshotSequence seq;
  seq.n_nodes = n;
  seq.dim = cfg.dim;
  seq.train_count = cfg.n_snapshots / 2;
  auto community = [&](bool second) {
    std::uniform_int_distribution<int> pick(second ? half : 0, second ? n - 1 : half - 1);
    return pick(rng);
  };
  for (int t = 0; t < cfg.n_snapshots; ++t) {
    Snapshot snap;
    snap.index = t;
    snap.n_nodes = n;
    const double leak =
        cfg.n_snapshots > 1 ? cfg.leak_max * t / static_cast<double>(cfg.n_snapshots - 1) : 0.0;
    while (static_cast<int>(snap.edges.size()) < m) {
      int a, b;
      if (unit(rng) < leak) {
        a = community(false);
        b = community(true);
      } else {
        const bool second = unit(rng) < 0.5;
        a = community(second);
        b = community(second);
      }
      if (a == b) continue;
      snap.edges.emplace_back(a, b);
    }
    snap.rebuild_adjacency();
    seq.snapshots.push_back(std::move(snap));
  }

  // Feature drift shared with nds_perturb semantics.
  seq.snapshots[0].features = x0;
  Rng drift_rng = make_rng(cfg.seed, /*stream=*/503);
  std::normal_distribution<double> drift(0.0, cfg.drift_sigma);
  for (int t = 1; t < cfg.n_snapshots; ++t) {
    Matrix x = seq.snapshots[t - 1].features;
    if (cfg.drift_sigma > 0.0)
      for (std::size_t k = 0; k < x.size(); ++k) x[k] += drift(drift_rng);
    seq.snapshots[t].features = std::move(x);
  }

  // Cross-community anomalies in the test half.
  for (int t = seq.train_count; t < cfg.n_snapshots; ++t) {
    Snapshot& snap = seq.snapshots[t];
    const std::size_t count = static_cast<std::size_t>(
        std::ceil(cfg.anomaly_ratio * static_cast<double>(snap.edges.size())));
    snap.labels.assign(snap.edges.size(), 0);
    Rng inj = make_rng(cfg.seed, /*stream=*/701 + static_cast<std::uint64_t>(t));
    std::unordered_set<std::uint64_t> taken;
    std::size_t made = 0, tries = 0;
    while (made < count) {
      if (++tries > 1000 * (count + 16)) throw SaturatedGraph("synth anomaly injection exhausted");
      std::uniform_int_distribution<int> lo(0, half - 1), hi(half, n - 1);
      const int a = lo(inj), b = hi(inj);
      if (snap.has_edge(a, b)) continue;
      if (!taken.insert(detail::pair_key(a, b, n)).second) continue;
      snap.edges.emplace_back(a, b);
      snap.labels.push_back(1);
      ++made;
    }
    snap.rebuild_adjacency();
  }
  return seq;
}

}  // namespace whends

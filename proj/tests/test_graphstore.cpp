#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "whends/graph.hpp"

using namespace whends;

namespace {

SnapshotSequence tiny_sequence(int n_nodes, int per_snap, int n_snaps, std::uint64_t seed) {
  Rng rng = make_rng(seed, 99);
  std::uniform_int_distribution<int> node(0, n_nodes - 1);
  SnapshotSequence seq;
  seq.n_nodes = n_nodes;
  for (int t = 0; t < n_snaps; ++t) {
    Snapshot snap;
    snap.index = t;
    snap.n_nodes = n_nodes;
    while (static_cast<int>(snap.edges.size()) < per_snap) {
      int a = node(rng), b = node(rng);
      if (a == b) continue;
      snap.edges.emplace_back(a, b);
    }
    snap.rebuild_adjacency();
    seq.snapshots.push_back(std::move(snap));
  }
  seq.train_count = n_snaps / 2;
  return seq;
}

void check_adjacency(const Snapshot& snap) {
  // symmetric, deduped, no self-loops, consistent with edge_set
  std::size_t directed = 0;
  for (int i = 0; i < snap.n_nodes; ++i) {
    std::unordered_set<int> seen;
    for (int nb : snap.neighbors[i]) {
      CHECK(nb != i);
      CHECK(seen.insert(nb).second);
      CHECK(snap.has_edge(i, nb));
      bool mirrored = false;
      for (int back : snap.neighbors[nb]) mirrored = mirrored || back == i;
      CHECK(mirrored);
      ++directed;
    }
  }
  CHECK(directed == 2 * snap.edge_set.size());
}

}  // namespace

TEST_CASE("parse_edge_list remaps ids and drops self-loops") {
  std::istringstream in(
      "# comment\n"
      "100 200\n"
      "200,300\n"
      "\n"
      "% another comment\n"
      "100 100\n"
      "300 100\n"
      "100 200\n");
  auto events = parse_edge_list(in);
  REQUIRE(events.size() == 4);  // self-loop dropped, duplicate kept
  CHECK(events[0].src == 0);
  CHECK(events[0].dst == 1);
  CHECK(events[1].src == 1);
  CHECK(events[1].dst == 2);
  CHECK(events[2].src == 2);
  CHECK(events[2].dst == 0);
  CHECK(events[3].src == 0);
  CHECK(events[3].dst == 1);
  CHECK(count_nodes(events) == 3);
}

TEST_CASE("parse_edge_list reports malformed lines with their number") {
  std::istringstream bad("1 2\nhello world\n");
  try {
    parse_edge_list(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream missing("1 2\n3\n");
  CHECK_THROWS_AS(parse_edge_list(missing), ParseError);
  std::istringstream empty("# nothing\n");
  CHECK_THROWS_AS(parse_edge_list(empty), EmptyInput);
}

TEST_CASE("build_snapshots blocks events and keeps the partial tail") {
  std::vector<EdgeEvent> events;
  Rng rng = make_rng(3, 0);
  std::uniform_int_distribution<int> node(0, 49);
  for (int k = 0; k < 2500; ++k) {
    int a = node(rng), b = node(rng);
    if (a == b) b = (a + 1) % 50;
    events.push_back({a, b, k});
  }
  SplitConfig cfg;
  cfg.snapshot_size = 1000;
  cfg.train_ratio = 0.5;
  auto seq = build_snapshots(events, cfg);
  REQUIRE(seq.snapshots.size() == 3);
  CHECK(seq.snapshots[0].edges.size() == 1000);
  CHECK(seq.snapshots[2].edges.size() == 500);  // partial block kept
  CHECK(seq.train_count == 1);                  // floor(0.5*3) = 1
  for (const auto& snap : seq.snapshots) check_adjacency(snap);
}

TEST_CASE("build_snapshots validates its inputs") {
  std::vector<EdgeEvent> one = {{0, 1, 0}};
  SplitConfig cfg;
  CHECK_THROWS_AS(build_snapshots({}, cfg), EmptyInput);
  CHECK_THROWS_AS(build_snapshots(one, cfg), TooFewEvents);
  cfg.train_ratio = 1.0;
  CHECK_THROWS_AS(build_snapshots(one, cfg), ConfigError);
  cfg.train_ratio = 0.5;
  cfg.snapshot_size = 0;
  CHECK_THROWS_AS(build_snapshots(one, cfg), ConfigError);
}

TEST_CASE("init_features rows are unit length and deterministic") {
  Matrix a = init_features(40, 16, 5);
  Matrix b = init_features(40, 16, 5);
  CHECK(max_abs_diff(a, b) == 0.0);
  for (int i = 0; i < 40; ++i) {
    double norm = 0.0;
    for (int j = 0; j < 16; ++j) norm += a(i, j) * a(i, j);
    CHECK(std::sqrt(norm) == Catch::Approx(1.0));
  }
  CHECK(max_abs_diff(a, init_features(40, 16, 6)) > 0.0);
}

TEST_CASE("inject_anomalies adds the right count of labeled non-edges") {
  auto seq = tiny_sequence(30, 60, 2, 7);
  const Snapshot& base = seq.snapshots[0];
  Snapshot out = inject_anomalies(base, 0.1, 7);
  const std::size_t expect = static_cast<std::size_t>(std::ceil(0.1 * base.edges.size()));
  REQUIRE(out.edges.size() == base.edges.size() + expect);
  REQUIRE(out.labels.size() == out.edges.size());
  for (std::size_t e = 0; e < base.edges.size(); ++e) CHECK(out.labels[e] == 0);
  for (std::size_t e = base.edges.size(); e < out.edges.size(); ++e) {
    CHECK(out.labels[e] == 1);
    CHECK_FALSE(base.has_edge(out.edges[e].first, out.edges[e].second));
    CHECK(out.edges[e].first != out.edges[e].second);
  }
  // injected pairs are distinct
  std::unordered_set<std::uint64_t> keys;
  for (std::size_t e = base.edges.size(); e < out.edges.size(); ++e)
    CHECK(keys.insert(detail::pair_key(out.edges[e].first, out.edges[e].second, out.n_nodes))
              .second);
  check_adjacency(out);
  CHECK_THROWS_AS(inject_anomalies(base, 0.0, 7), ConfigError);
  CHECK_THROWS_AS(inject_anomalies(base, 0.6, 7), ConfigError);
}

TEST_CASE("augment_training draws alpha in the one-to-ten percent band") {
  auto seq = tiny_sequence(40, 100, 2, 11);
  const Snapshot& base = seq.snapshots[0];
  double mean_ratio = 0.0;
  const int trials = 1000;
  for (int k = 0; k < trials; ++k) {
    Snapshot aug = augment_training(base, 1000 + k);
    const double added = static_cast<double>(aug.edges.size() - base.edges.size());
    const double ratio = added / static_cast<double>(base.edges.size());
    CHECK(ratio >= 0.01 - 1e-9);
    CHECK(ratio <= 0.10 + 0.01 + 1e-9);  // ceil can push one edge past alpha
    mean_ratio += ratio / trials;
  }
  CHECK(mean_ratio > 0.045);
  CHECK(mean_ratio < 0.075);
}

TEST_CASE("negative_sample doubles the batch with valid non-edges") {
  auto seq = tiny_sequence(30, 50, 2, 13);
  const Snapshot& snap = seq.snapshots[0];
  EdgeBatch batch = negative_sample(snap, 21);
  REQUIRE(batch.edges.size() == 2 * snap.edges.size());
  for (std::size_t e = 0; e < snap.edges.size(); ++e) {
    CHECK(batch.labels[e] == 0);
    CHECK(batch.edges[e] == snap.edges[e]);
  }
  std::unordered_set<std::uint64_t> keys;
  for (std::size_t e = snap.edges.size(); e < batch.edges.size(); ++e) {
    CHECK(batch.labels[e] == 1);
    CHECK_FALSE(snap.has_edge(batch.edges[e].first, batch.edges[e].second));
    CHECK(batch.edges[e].first != batch.edges[e].second);
    CHECK(keys.insert(detail::pair_key(batch.edges[e].first, batch.edges[e].second, snap.n_nodes))
              .second);
  }
  // deterministic under the same seed
  EdgeBatch again = negative_sample(snap, 21);
  CHECK(again.edges == batch.edges);
}

TEST_CASE("negative_sample refuses nearly saturated graphs") {
  Snapshot dense;
  dense.index = 0;
  dense.n_nodes = 5;
  for (int a = 0; a < 5; ++a)
    for (int b = a + 1; b < 5; ++b)
      if (!(a == 0 && b == 1)) dense.edges.emplace_back(a, b);
  dense.rebuild_adjacency();
  CHECK_THROWS_AS(negative_sample(dense, 1), SaturatedGraph);
}

TEST_CASE("nds_perturb is a cumulative random walk") {
  auto seq = tiny_sequence(500, 100, 11, 17);
  for (auto& s : seq.snapshots) s.features = init_features(500, 16, 17);
  const double sigma = 0.5;
  auto out = nds_perturb(seq, sigma, 17);
  CHECK(max_abs_diff(out.snapshots[0].features, seq.snapshots[0].features) == 0.0);
  // per-entry variance of X^t - X^0 across the matrix is about t * sigma^2
  const int t = 10;
  Matrix diff = sub(out.snapshots[t].features, out.snapshots[0].features);
  double var = 0.0;
  for (std::size_t k = 0; k < diff.size(); ++k) var += diff[k] * diff[k];
  var /= static_cast<double>(diff.size());
  CHECK(var == Catch::Approx(t * sigma * sigma).epsilon(0.10));
  // zero sigma leaves everything untouched
  auto same = nds_perturb(seq, 0.0, 17);
  for (std::size_t k = 0; k < seq.snapshots.size(); ++k)
    CHECK(max_abs_diff(same.snapshots[k].features, seq.snapshots[k].features) == 0.0);
  CHECK_THROWS_AS(nds_perturb(seq, -0.1, 17), ConfigError);
}

TEST_CASE("synth benchmark structure and labels") {
  SynthConfig cfg;
  cfg.n_nodes = 100;
  cfg.n_snapshots = 8;
  cfg.dim = 8;
  cfg.drift_sigma = 0.3;
  cfg.anomaly_ratio = 0.1;
  cfg.seed = 19;
  auto seq = synth_nds_benchmark(cfg);
  REQUIRE(seq.snapshots.size() == 8);
  CHECK(seq.train_count == 4);
  CHECK(seq.n_nodes == 100);
  CHECK(seq.dim == 8);
  for (int t = 0; t < seq.train_count; ++t) CHECK(seq.snapshots[t].labels.empty());
  for (std::size_t t = seq.train_count; t < seq.snapshots.size(); ++t) {
    const Snapshot& snap = seq.snapshots[t];
    REQUIRE(snap.labels.size() == snap.edges.size());
    std::size_t anomalies = 0;
    for (std::size_t e = 0; e < snap.edges.size(); ++e) {
      if (!snap.labels[e]) continue;
      ++anomalies;
      // anomalies bridge the two communities
      const bool a_first = snap.edges[e].first < cfg.n_nodes / 2;
      const bool b_first = snap.edges[e].second < cfg.n_nodes / 2;
      CHECK(a_first != b_first);
    }
    const std::size_t normals = snap.edges.size() - anomalies;
    CHECK(anomalies == static_cast<std::size_t>(std::ceil(cfg.anomaly_ratio * normals)));
    check_adjacency(snap);
  }
  // determinism
  auto again = synth_nds_benchmark(cfg);
  for (std::size_t t = 0; t < seq.snapshots.size(); ++t) {
    CHECK(again.snapshots[t].edges == seq.snapshots[t].edges);
    CHECK(max_abs_diff(again.snapshots[t].features, seq.snapshots[t].features) == 0.0);
  }
}

TEST_CASE("synth benchmark with zero leak has no inter-community normal edges") {
  SynthConfig cfg;
  cfg.n_nodes = 60;
  cfg.n_snapshots = 6;
  cfg.dim = 4;
  cfg.drift_sigma = 0.0;
  cfg.leak_max = 0.0;
  cfg.seed = 23;
  auto seq = synth_nds_benchmark(cfg);
  for (const auto& snap : seq.snapshots)
    for (std::size_t e = 0; e < snap.edges.size(); ++e) {
      if (!snap.labels.empty() && snap.labels[e]) continue;
      const bool a_first = snap.edges[e].first < cfg.n_nodes / 2;
      const bool b_first = snap.edges[e].second < cfg.n_nodes / 2;
      CHECK(a_first == b_first);
    }
  // sigma = 0 freezes features across snapshots
  for (std::size_t t = 1; t < seq.snapshots.size(); ++t)
    CHECK(max_abs_diff(seq.snapshots[t].features, seq.snapshots[0].features) == 0.0);
}

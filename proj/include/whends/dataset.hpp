#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>

#include "whends/graph.hpp"

namespace whends {

// On-disk dataset layout (directory):
//   meta.txt        key=value: n_nodes, dim, n_snapshots, train_count,
//                   snapshot_sizes (comma list), per_snapshot_features
//   edges.txt       "src dst t" per edge, snapshots concatenated in order
//   labels.txt      "t src dst label" per edge of labeled snapshots, aligned
//                   with edges.txt order (present only when labels exist)
//   features.txt    one node per line, d floats (shared features), or
//   features_<t>.txt per snapshot when features differ over time

namespace detail {
inline std::map<std::string, std::string> read_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("bad meta line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline void write_features(std::ofstream& out, const Matrix& x) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out << (j ? " " : "") << x(i, j);
    out << "\n";
  }
}
}  // namespace detail

inline void save_dataset(const SnapshotSequence& seq, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  bool per_snapshot = false;
  for (std::size_t t = 1; t < seq.snapshots.size(); ++t)
    if (seq.snapshots[t].features.data() != seq.snapshots[0].features.data()) per_snapshot = true;
  bool labeled = false;
  for (const auto& s : seq.snapshots)
    if (!s.labels.empty()) labeled = true;

  {
    std::ofstream meta(dir + "/meta.txt");
    if (!meta) throw IoError("cannot write " + dir + "/meta.txt");
    meta << "n_nodes=" << seq.n_nodes << "\n";
    meta << "dim=" << seq.dim << "\n";
    meta << "n_snapshots=" << seq.snapshots.size() << "\n";
    meta << "train_count=" << seq.train_count << "\n";
    meta << "per_snapshot_features=" << (per_snapshot ? 1 : 0) << "\n";
    meta << "snapshot_sizes=";
    for (std::size_t t = 0; t < seq.snapshots.size(); ++t)
      meta << (t ? "," : "") << seq.snapshots[t].edges.size();
    meta << "\n";
  }
  {
    std::ofstream edges(dir + "/edges.txt");
    for (const auto& s : seq.snapshots)
      for (auto [a, b] : s.edges) edges << a << " " << b << " " << s.index << "\n";
  }
  if (labeled) {
    std::ofstream lab(dir + "/labels.txt");
    for (const auto& s : seq.snapshots) {
      if (s.labels.empty()) continue;
      for (std::size_t e = 0; e < s.edges.size(); ++e)
        lab << s.index << " " << s.edges[e].first << " " << s.edges[e].second << " "
            << s.labels[e] << "\n";
    }
  }
  if (per_snapshot) {
    for (const auto& s : seq.snapshots) {
      std::ofstream f(dir + "/features_" + std::to_string(s.index) + ".txt");
      detail::write_features(f, s.features);
    }
  } else {
    std::ofstream f(dir + "/features.txt");
    detail::write_features(f, seq.snapshots.empty() ? Matrix() : seq.snapshots[0].features);
  }
}

inline SnapshotSequence load_dataset(const std::string& dir) {
  auto kv = detail::read_kv(dir + "/meta.txt");
  SnapshotSequence seq;
  seq.n_nodes = std::stoi(kv.at("n_nodes"));
  seq.dim = std::stoi(kv.at("dim"));
  seq.train_count = std::stoi(kv.at("train_count"));
  const int n_snapshots = std::stoi(kv.at("n_snapshots"));
  const bool per_snapshot = std::stoi(kv.at("per_snapshot_features")) != 0;

  std::vector<std::size_t> sizes;
  {
    std::istringstream ss(kv.at("snapshot_sizes"));
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoul(tok));
  }
  if (static_cast<int>(sizes.size()) != n_snapshots)
    throw ParseError("meta snapshot_sizes count mismatch");

  std::ifstream edges(dir + "/edges.txt");
  if (!edges) throw IoError("cannot open " + dir + "/edges.txt");
  for (int t = 0; t < n_snapshots; ++t) {
    Snapshot snap;
    snap.index = t;
    snap.n_nodes = seq.n_nodes;
    for (std::size_t e = 0; e < sizes[t]; ++e) {
      int a, b, ts;
      if (!(edges >> a >> b >> ts)) throw ParseError("edges.txt truncated");
      snap.edges.emplace_back(a, b);
    }
    snap.rebuild_adjacency();
    seq.snapshots.push_back(std::move(snap));
  }

  Matrix shared;
  if (!per_snapshot) shared = load_features(dir + "/features.txt", seq.n_nodes, seq.dim);
  for (auto& snap : seq.snapshots)
    snap.features = per_snapshot ? load_features(dir + "/features_" + std::to_string(snap.index) +
                                                     ".txt",
                                                 seq.n_nodes, seq.dim)
                                 : shared;

  std::ifstream lab(dir + "/labels.txt");
  if (lab) {
    int t, a, b, y;
    while (lab >> t >> a >> b >> y) {
      Snapshot& snap = seq.snapshots.at(t);
      if (snap.labels.size() >= snap.edges.size()) throw ParseError("labels.txt: extra labels");
      const auto& edge = snap.edges[snap.labels.size()];
      if (edge.first != a || edge.second != b)
        throw ParseError("labels.txt: edge order mismatch at snapshot " + std::to_string(t));
      snap.labels.push_back(y);
    }
    for (const auto& snap : seq.snapshots)
      if (!snap.labels.empty() && snap.labels.size() != snap.edges.size())
        throw ParseError("labels.txt: incomplete labels for snapshot " +
                         std::to_string(snap.index));
  }
  return seq;
}

}  // namespace whends

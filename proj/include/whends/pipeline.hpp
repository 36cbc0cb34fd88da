#pragma once

#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "whends/checkpoint.hpp"
#include "whends/dataset.hpp"
#include "whends/detector.hpp"
#include "whends/encoder.hpp"
#include "whends/nsem.hpp"

namespace whends {

struct TrainConfig {
  int epochs_encoder = 100;
  int epochs_nsem = 200;
  int epochs_detector = 400;
  double lr_encoder = 5e-4;
  double lr_nsem = 1e-3;
  double lr_detector = 1e-3;
  int dim = 32;          // embedding dimension
  int h_dim = 0;         // NSEM GRU hidden size; 0 => dim
  int neighbor_k = 10;
  std::uint64_t seed = 1;
  int snapshot_size = 1000;
  double train_ratio = 0.5;
  bool no_nsem = false;
  bool no_gru = false;
  bool no_dataaug = false;
  bool simple_encoder = false;
  bool bce_average = false;

  int hidden_dim() const { return h_dim > 0 ? h_dim : dim; }

  void validate() const {
    if (epochs_encoder < 1 || epochs_nsem < 1 || epochs_detector < 1)
      throw ConfigError("all stage epoch counts must be >= 1");
    if (lr_encoder <= 0 || lr_nsem <= 0 || lr_detector <= 0)
      throw ConfigError("learning rates must be > 0");
    if (dim < 1) throw ConfigError("dim must be >= 1");
  }

  void apply(const std::string& key, const std::string& value);
  static TrainConfig from_file(const std::string& path);
};

inline void TrainConfig::apply(const std::string& key, const std::string& value) {
  auto as_bool = [&] {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ConfigError("boolean expected for " + key + ", got " + value);
  };
  try {
    if (key == "epochs_encoder") epochs_encoder = std::stoi(value);
    else if (key == "epochs_nsem") epochs_nsem = std::stoi(value);
    else if (key == "epochs_detector") epochs_detector = std::stoi(value);
    else if (key == "lr_encoder") lr_encoder = std::stod(value);
    else if (key == "lr_nsem") lr_nsem = std::stod(value);
    else if (key == "lr_detector") lr_detector = std::stod(value);
    else if (key == "dim") dim = std::stoi(value);
    else if (key == "h_dim") h_dim = std::stoi(value);
    else if (key == "neighbor_k") neighbor_k = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "snapshot_size") snapshot_size = std::stoi(value);
    else if (key == "train_ratio") train_ratio = std::stod(value);
    else if (key == "no_nsem") no_nsem = as_bool();
    else if (key == "no_gru") no_gru = as_bool();
    else if (key == "no_dataaug") no_dataaug = as_bool();
    else if (key == "simple_encoder") simple_encoder = as_bool();
    else if (key == "bce_average") bce_average = as_bool();
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value for " + key + ": " + value);
  }
}

inline TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("bad config line: " + line);
    cfg.apply(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

struct ModelBundle {
  EncoderParams encoder;
  NsemParams nsem;
  DetectorParams detector;
  NsemState nsem_state;  // h_s at the end of the training prefix
  TrainConfig cfg;
  int dim_in = 0;
};

namespace detail {
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return seed * 6364136223846793005ull + salt * 1442695040888963407ull + 1ull;
}
}  // namespace detail

// Stage 1: encoder training on the unmodified training prefix, one Adam
// update per snapshot, recurrent state reset each epoch.
inline EncoderParams train_encoder(const SnapshotSequence& seq, const TrainConfig& cfg,
                                   std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  if (seq.train_count < 1) throw ConfigError("no training snapshots");
  Rng init_rng = make_rng(cfg.seed, /*stream=*/1000);
  EncoderParams enc =
      EncoderParams::init(seq.dim, cfg.dim, cfg.neighbor_k, cfg.simple_encoder, init_rng);
  std::vector<Param*> params = enc.params();
  Adam opt(cfg.lr_encoder);

  std::vector<Matrix> dense_adj;
  dense_adj.reserve(seq.train_count);
  for (int t = 0; t < seq.train_count; ++t)
    dense_adj.push_back(seq.snapshots[t].dense_adjacency());

  for (int epoch = 0; epoch < cfg.epochs_encoder; ++epoch) {
    EncoderState state = EncoderState::initial(seq.n_nodes, cfg.dim);
    double epoch_loss = 0.0;
    for (int t = 0; t < seq.train_count; ++t) {
      const Snapshot& snap = seq.snapshots[t];
      Rng samp = make_rng(detail::mix_seed(cfg.seed, epoch), /*stream=*/811 + t);
      auto samples_t = sample_neighbors(snap.neighbors, cfg.neighbor_k, samp);
      auto samples_prev =
          t > 0 ? sample_neighbors(seq.snapshots[t - 1].neighbors, cfg.neighbor_k, samp)
                : samples_t;
      Tape tape;
      EncoderStepVars step = encoder_step(tape, enc, snap.features, samples_t, samples_prev, state);
      ReconVars recon = reconstruct(tape, enc, step.z_node);
      Var loss = recon_loss(tape, recon, snap.features, dense_adj[t]);
      epoch_loss += tape.value(loss)[0];
      tape.backward(loss);
      opt.step(params);
      state.h = tape.value(step.h);
      state.c = tape.value(step.c);
      state.n = tape.value(step.n);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / seq.train_count);
  }
  return enc;
}

// Stage 2: NSEM training with per-epoch re-randomized augmentation and
// teacher-forced GRU advance. The encoder is frozen.
inline std::pair<NsemParams, NsemState> train_nsem(const SnapshotSequence& seq,
                                                   EncoderParams& enc, const TrainConfig& cfg,
                                                   std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  Rng init_rng = make_rng(cfg.seed, /*stream=*/2000);
  NsemParams nsem = NsemParams::init(cfg.dim, cfg.hidden_dim(), init_rng);
  std::vector<Param*> params = nsem.params();
  Adam opt(cfg.lr_nsem);

  NsemState h_entering = NsemState::initial(cfg.hidden_dim());
  for (int epoch = 0; epoch < cfg.epochs_nsem; ++epoch) {
    EncoderState enc_state = EncoderState::initial(seq.n_nodes, cfg.dim);
    h_entering = NsemState::initial(cfg.hidden_dim());
    NsemState h_base = NsemState::initial(cfg.hidden_dim());
    Matrix x_prev;  // teacher-forced GRU input from the previous snapshot
    Snapshot prev_aug;
    double epoch_loss = 0.0;
    for (int t = 0; t < seq.train_count; ++t) {
      Snapshot aug = cfg.no_dataaug
                         ? seq.snapshots[t]
                         : augment_training(seq.snapshots[t],
                                            detail::mix_seed(cfg.seed, 7000 + epoch));
      if (aug.labels.empty()) aug.labels.assign(aug.edges.size(), 0);
      Matrix z = encoder_forward(enc, aug, t > 0 ? &prev_aug : nullptr, enc_state, cfg.seed);
      Matrix emb_all = edge_embed(z, aug.edges);
      GaussianStats stats_all = edge_stats(emb_all);
      std::vector<std::pair<int, int>> normal_edges;
      for (std::size_t e = 0; e < aug.edges.size(); ++e)
        if (aug.labels[e] == 0) normal_edges.push_back(aug.edges[e]);
      if (normal_edges.size() < 2) throw TooFewSamples("snapshot has fewer than 2 normal edges");
      GaussianStats stats_norm = edge_stats(edge_embed(z, normal_edges));

      Tape tape;
      Var h_prev;
      if (cfg.no_gru || t == 0) {
        h_prev = tape.constant(Matrix(1, cfg.hidden_dim()));
      } else {
        // Replay the most recent GRU step on the tape so its weights get a
        // gradient through the deviation MLP (one-step truncation).
        GruStepVars replay = gru_step_vars(tape, nsem, tape.constant(x_prev),
                                           tape.constant(h_base.h[0]), tape.constant(h_base.h[1]));
        h_prev = replay.h[1];
      }
      DeviationVars dev = predict_deviation_vars(tape, nsem, stats_all, h_prev);
      RecoveredVars rec = recover_normal_vars(tape, stats_all, dev);
      Var loss = statistics_loss_vars(tape, rec, stats_norm);
      epoch_loss += tape.value(loss)[0];
      tape.backward(loss);
      opt.step(params);

      if (!cfg.no_gru) {
        const Matrix x_t = gru_input(stats_norm);
        h_base = h_entering;
        x_prev = x_t;
        h_entering = gru_step(x_t, h_entering, nsem);
      }
      prev_aug = std::move(aug);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / seq.train_count);
  }
  return {std::move(nsem), std::move(h_entering)};
}

// Stage 3: anomaly detector training on pseudo-labels, whitening with the
// ground-truth normal statistics of each training snapshot. The node
// embeddings are computed once (the encoder is frozen and the negatives do
// not alter the graph).
inline DetectorParams train_detector(const SnapshotSequence& seq, EncoderParams& enc,
                                     const TrainConfig& cfg,
                                     std::vector<double>* epoch_losses = nullptr,
                                     std::vector<Vec>* last_epoch_scores = nullptr,
                                     std::vector<std::vector<int>>* last_epoch_labels = nullptr) {
  cfg.validate();
  Rng init_rng = make_rng(cfg.seed, /*stream=*/3000);
  DetectorParams det = DetectorParams::init(cfg.dim, init_rng);
  std::vector<Param*> params = det.params();
  Adam opt(cfg.lr_detector);

  EncoderState enc_state = EncoderState::initial(seq.n_nodes, cfg.dim);
  std::vector<Matrix> z_nodes(seq.train_count);
  std::vector<GaussianStats> stats(seq.train_count);
  std::vector<Matrix> transforms(seq.train_count);
  for (int t = 0; t < seq.train_count; ++t) {
    const Snapshot& snap = seq.snapshots[t];
    z_nodes[t] =
        encoder_forward(enc, snap, t > 0 ? &seq.snapshots[t - 1] : nullptr, enc_state, cfg.seed);
    stats[t] = edge_stats(edge_embed(z_nodes[t], snap.edges));
    if (!cfg.no_nsem) transforms[t] = inv_sqrt(add_jitter(stats[t].sigma));
  }

  for (int epoch = 0; epoch < cfg.epochs_detector; ++epoch) {
    double epoch_loss = 0.0;
    if (last_epoch_scores) {
      last_epoch_scores->clear();
      last_epoch_labels->clear();
    }
    for (int t = 0; t < seq.train_count; ++t) {
      EdgeBatch batch =
          negative_sample(seq.snapshots[t], detail::mix_seed(cfg.seed, 9000 + epoch));
      Matrix emb = edge_embed(z_nodes[t], batch.edges);
      Matrix z_tilde = cfg.no_nsem ? emb : whiten_rows(emb, stats[t].mu, transforms[t]);
      Tape tape;
      Var scores = score_vars(tape, det, tape.constant(z_tilde));
      std::vector<double> y(batch.labels.begin(), batch.labels.end());
      Var loss = tape.bce(scores, y, cfg.bce_average);
      epoch_loss += tape.value(loss)[0];
      if (last_epoch_scores) {
        last_epoch_scores->push_back(tape.value(scores).to_vec());
        last_epoch_labels->push_back(batch.labels);
      }
      tape.backward(loss);
      opt.step(params);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / seq.train_count);
  }
  return det;
}

inline ModelBundle train(const SnapshotSequence& seq, const TrainConfig& cfg) {
  ModelBundle bundle;
  bundle.cfg = cfg;
  bundle.dim_in = seq.dim;
  bundle.encoder = train_encoder(seq, cfg);
  auto [nsem, h_s] = train_nsem(seq, bundle.encoder, cfg);
  bundle.nsem = std::move(nsem);
  bundle.nsem_state = std::move(h_s);
  bundle.detector = train_detector(seq, bundle.encoder, cfg);
  return bundle;
}

// Scores every edge of every test snapshot in time order. Whitening uses the
// NSEM-predicted normal statistics; the GRU hidden state advances on the
// predicted statistics. Under no_nsem, raw embeddings are scored.
inline std::vector<ScoredEdge> detect(const SnapshotSequence& seq, ModelBundle& bundle) {
  const TrainConfig& cfg = bundle.cfg;
  EncoderState enc_state = EncoderState::initial(seq.n_nodes, cfg.dim);
  for (int t = 0; t < seq.train_count; ++t)  // warm-start over the training prefix
    encoder_forward(bundle.encoder, seq.snapshots[t], t > 0 ? &seq.snapshots[t - 1] : nullptr,
                    enc_state, cfg.seed);
  NsemState h_s = bundle.nsem_state;
  std::vector<ScoredEdge> out;
  for (std::size_t t = seq.train_count; t < seq.snapshots.size(); ++t) {
    const Snapshot& snap = seq.snapshots[t];
    Matrix z = encoder_forward(bundle.encoder, snap, &seq.snapshots[t - 1], enc_state, cfg.seed);
    Matrix emb = edge_embed(z, snap.edges);
    Matrix z_tilde;
    if (cfg.no_nsem) {
      z_tilde = emb;
    } else {
      GaussianStats stats_all = edge_stats(emb);
      auto [dmu, dl] = predict_deviation(stats_all, h_s, bundle.nsem);
      GaussianStats pred = recover_normal(stats_all, dmu, dl);
      z_tilde = whiten_rows(emb, pred.mu, inv_sqrt(pred.sigma));
      if (!cfg.no_gru) h_s = gru_step(gru_input(pred), h_s, bundle.nsem);
    }
    Vec scores = score_rows(bundle.detector, z_tilde);
    for (std::size_t e = 0; e < snap.edges.size(); ++e)
      out.push_back({static_cast<int>(t), snap.edges[e].first, snap.edges[e].second, scores[e],
                     snap.labels.empty() ? -1 : snap.labels[e]});
  }
  return out;
}

namespace detail {

inline void add_params(CheckpointWriter& w, std::vector<Param*> params) {
  for (const Param* p : params) w.add(p->name, p->value);
}

inline void restore_params(const Checkpoint& ck, std::vector<Param*> params) {
  for (Param* p : params) {
    const Matrix& m = ck.at(p->name);
    if (!m.same_shape(p->value))
      throw CorruptCheckpoint("shape mismatch for tensor " + p->name);
    p->value = m;
  }
}

}  // namespace detail

inline void save_bundle(const ModelBundle& bundle, const std::string& path) {
  CheckpointWriter w;
  const TrainConfig& c = bundle.cfg;
  w.set_meta("dim", std::to_string(c.dim));
  w.set_meta("dim_in", std::to_string(bundle.dim_in));
  w.set_meta("h_dim", std::to_string(c.hidden_dim()));
  w.set_meta("neighbor_k", std::to_string(c.neighbor_k));
  w.set_meta("seed", std::to_string(c.seed));
  w.set_meta("no_nsem", c.no_nsem ? "1" : "0");
  w.set_meta("no_gru", c.no_gru ? "1" : "0");
  w.set_meta("no_dataaug", c.no_dataaug ? "1" : "0");
  w.set_meta("simple_encoder", c.simple_encoder ? "1" : "0");
  ModelBundle& b = const_cast<ModelBundle&>(bundle);
  detail::add_params(w, b.encoder.params());
  detail::add_params(w, b.nsem.params());
  detail::add_params(w, b.detector.params());
  w.add("nsem.state.h1", bundle.nsem_state.h[0]);
  w.add("nsem.state.h2", bundle.nsem_state.h[1]);
  w.write(path);
}

inline ModelBundle load_bundle(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  ModelBundle b;
  b.cfg.dim = std::stoi(ck.meta.at("dim"));
  b.dim_in = std::stoi(ck.meta.at("dim_in"));
  b.cfg.h_dim = std::stoi(ck.meta.at("h_dim"));
  b.cfg.neighbor_k = std::stoi(ck.meta.at("neighbor_k"));
  b.cfg.seed = std::stoull(ck.meta.at("seed"));
  b.cfg.no_nsem = ck.meta.at("no_nsem") == "1";
  b.cfg.no_gru = ck.meta.at("no_gru") == "1";
  b.cfg.no_dataaug = ck.meta.at("no_dataaug") == "1";
  b.cfg.simple_encoder = ck.meta.at("simple_encoder") == "1";
  Rng dummy = make_rng(0);
  b.encoder = EncoderParams::init(b.dim_in, b.cfg.dim, b.cfg.neighbor_k, b.cfg.simple_encoder,
                                  dummy);
  b.nsem = NsemParams::init(b.cfg.dim, b.cfg.hidden_dim(), dummy);
  b.detector = DetectorParams::init(b.cfg.dim, dummy);
  detail::restore_params(ck, b.encoder.params());
  detail::restore_params(ck, b.nsem.params());
  detail::restore_params(ck, b.detector.params());
  b.nsem_state.h[0] = ck.at("nsem.state.h1");
  b.nsem_state.h[1] = ck.at("nsem.state.h2");
  return b;
}

}  // namespace whends

// Command-line entry point: ingestion, synthetic benchmark generation,
// training, detection, sweeps, and the fast self-check suite.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "whends/check.hpp"
#include "whends/eval.hpp"

namespace {

void log_line(const std::string& msg) { std::cerr << "[whends] " << msg << "\n"; }

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

void add_config_flags(CLI::App* cmd, whends::TrainConfig& cfg) {
  cmd->add_option("--epochs-encoder", cfg.epochs_encoder);
  cmd->add_option("--epochs-nsem", cfg.epochs_nsem);
  cmd->add_option("--epochs-detector", cfg.epochs_detector);
  cmd->add_option("--lr-encoder", cfg.lr_encoder);
  cmd->add_option("--lr-nsem", cfg.lr_nsem);
  cmd->add_option("--lr-detector", cfg.lr_detector);
  cmd->add_option("--dim", cfg.dim);
  cmd->add_option("--h-dim", cfg.h_dim);
  cmd->add_option("--neighbor-k", cfg.neighbor_k);
  cmd->add_option("--seed", cfg.seed);
  cmd->add_flag("--no-nsem", cfg.no_nsem);
  cmd->add_flag("--no-gru", cfg.no_gru);
  cmd->add_flag("--no-dataaug", cfg.no_dataaug);
  cmd->add_flag("--simple-encoder", cfg.simple_encoder);
  cmd->add_flag("--bce-average", cfg.bce_average);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WhENDS: whitening-based anomaly detection for dynamic graphs"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse an edge list into a snapshot dataset");
  std::string in_edges, in_features, out_dir;
  whends::SplitConfig split;
  int ingest_dim = 32;
  std::uint64_t ingest_seed = 1;
  ingest->add_option("--edges", in_edges, "edge list file")->required();
  ingest->add_option("--features", in_features, "optional per-node feature file");
  ingest->add_option("--snapshot-size", split.snapshot_size);
  ingest->add_option("--train-ratio", split.train_ratio);
  ingest->add_option("--dim", ingest_dim, "feature dimension when generating features");
  ingest->add_option("--seed", ingest_seed);
  ingest->add_option("--out", out_dir, "output dataset directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate the two-community NDS benchmark");
  whends::SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--nodes", synth_cfg.n_nodes);
  synth->add_option("--snapshots", synth_cfg.n_snapshots);
  synth->add_option("--dim", synth_cfg.dim);
  synth->add_option("--sigma", synth_cfg.drift_sigma, "feature drift standard deviation");
  synth->add_option("--ratio", synth_cfg.anomaly_ratio, "injected anomaly ratio");
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--edges-per-snapshot", synth_cfg.edges_per_snapshot);
  synth->add_option("--leak", synth_cfg.leak_max, "max inter-community normal-edge fraction");
  synth->add_option("--offset", synth_cfg.community_offset, "community feature offset");
  synth->add_option("--feature-scale", synth_cfg.feature_scale, "base feature row scale");
  synth->add_option("--out", synth_out)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "run the three-stage training procedure");
  std::string train_data, train_cfg_path, train_out;
  whends::TrainConfig train_cfg;
  bool train_cfg_loaded = false;
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd
      ->add_option_function<std::string>(
          "--config",
          [&](const std::string& path) {
            whends::TrainConfig file_cfg = whends::TrainConfig::from_file(path);
            train_cfg = file_cfg;  // flags applied afterwards win
            train_cfg_loaded = true;
          },
          "key=value config file")
      ->trigger_on_parse();
  add_config_flags(train_cmd, train_cfg);
  train_cmd->add_option("--out", train_out, "checkpoint path")->required();

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "score test snapshots with a trained model");
  std::string det_data, det_model, det_out;
  detect_cmd->add_option("--data", det_data)->required();
  detect_cmd->add_option("--model", det_model)->required();
  detect_cmd->add_option("--out", det_out, "scores CSV path")->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a seeded experiment sweep");
  std::string sweep_axis, sweep_values, sweep_seeds = "1,2,3", sweep_ablate;
  std::string sweep_out, sweep_format = "csv";
  whends::SweepSpec spec;
  sweep_cmd->add_option("--axis", sweep_axis, "anomaly_ratio|shift_sigma|embedding_dim|train_ratio|ablation")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated axis values")->required();
  sweep_cmd->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  sweep_cmd->add_option("--ablate", sweep_ablate, "pair every value with this ablation variant");
  sweep_cmd->add_option("--jobs", spec.jobs, "parallel sweep workers");
  sweep_cmd->add_option("--nodes", spec.synth.n_nodes);
  sweep_cmd->add_option("--snapshots", spec.synth.n_snapshots);
  sweep_cmd->add_option("--synth-dim", spec.synth.dim);
  sweep_cmd->add_option("--ratio", spec.synth.anomaly_ratio);
  sweep_cmd->add_option("--sigma", spec.synth.drift_sigma);
  add_config_flags(sweep_cmd, spec.base);
  sweep_cmd->add_option("--format", sweep_format, "csv|json");
  sweep_cmd->add_option("--out", sweep_out)->required();

  // check
  auto* check_cmd = app.add_subcommand("check", "run the fast invariant suite");
  bool corrupt = false;
  check_cmd->add_flag("--corrupt-whitening", corrupt)->group("");  // test hook, hidden

  try {
    app.parse(argc, argv);

    if (*ingest) {
      std::ifstream in(in_edges);
      if (!in) {
        std::cerr << "error: cannot open edge file: " << in_edges << "\n";
        return 2;
      }
      auto events = whends::parse_edge_list(in);
      split.seed = ingest_seed;
      auto seq = whends::build_snapshots(events, split);
      seq.dim = ingest_dim;
      whends::Matrix feats = in_features.empty()
                                 ? whends::init_features(seq.n_nodes, ingest_dim, ingest_seed)
                                 : whends::load_features(in_features, seq.n_nodes, ingest_dim);
      for (auto& s : seq.snapshots) s.features = feats;
      whends::save_dataset(seq, out_dir);
      std::size_t total_edges = 0;
      for (const auto& s : seq.snapshots) total_edges += s.edges.size();
      std::cout << "nodes=" << seq.n_nodes << " edges=" << total_edges
                << " snapshots=" << seq.snapshots.size() << " K=" << seq.train_count << "\n";
      return 0;
    }

    if (*synth) {
      auto seq = whends::synth_nds_benchmark(synth_cfg);
      whends::save_dataset(seq, synth_out);
      std::cout << "nodes=" << seq.n_nodes << " snapshots=" << seq.snapshots.size()
                << " K=" << seq.train_count << " dim=" << seq.dim << "\n";
      return 0;
    }

    if (*train_cmd) {
      (void)train_cfg_loaded;
      train_cfg.validate();
      auto seq = whends::load_dataset(train_data);
      log_line("training encoder (" + std::to_string(train_cfg.epochs_encoder) + " epochs)");
      whends::ModelBundle bundle;
      bundle.cfg = train_cfg;
      bundle.dim_in = seq.dim;
      bundle.encoder = whends::train_encoder(seq, train_cfg);
      log_line("training nsem (" + std::to_string(train_cfg.epochs_nsem) + " epochs)");
      auto [nsem, h_s] = whends::train_nsem(seq, bundle.encoder, train_cfg);
      bundle.nsem = std::move(nsem);
      bundle.nsem_state = std::move(h_s);
      log_line("training detector (" + std::to_string(train_cfg.epochs_detector) + " epochs)");
      bundle.detector = whends::train_detector(seq, bundle.encoder, train_cfg);
      whends::save_bundle(bundle, train_out);
      std::cout << "checkpoint=" << train_out << "\n";
      return 0;
    }

    if (*detect_cmd) {
      auto seq = whends::load_dataset(det_data);
      auto bundle = whends::load_bundle(det_model);
      auto scored = whends::detect(seq, bundle);
      std::ofstream out(det_out);
      if (!out) throw whends::IoError("cannot write scores: " + det_out);
      whends::write_scores_csv(scored, out);
      bool labeled = false;
      for (const auto& e : scored)
        if (e.label >= 0) labeled = true;
      if (labeled) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f", whends::auc_roc(scored));
        std::cout << "auc=" << buf << "\n";
      }
      return 0;
    }

    if (*sweep_cmd) {
      spec.axis = whends::parse_axis(sweep_axis);
      spec.values = split_csv(sweep_values);
      spec.seeds.clear();
      for (const auto& s : split_csv(sweep_seeds)) spec.seeds.push_back(std::stoull(s));
      spec.ablate = sweep_ablate;
      auto report = whends::run_sweep(spec);
      whends::write_report(report, sweep_out, sweep_format);
      std::cout << "report=" << sweep_out << " rows=" << report.rows.size() << "\n";
      return report.any_error() ? 1 : 0;
    }

    if (*check_cmd) {
      whends::CheckOptions opt;
      opt.corrupt_whitening = corrupt;
      const bool ok = whends::print_checks(whends::run_checks(opt), std::cout);
      return ok ? 0 : 1;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const whends::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const whends::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const whends::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

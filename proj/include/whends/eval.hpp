#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <chrono>
#include <fstream>
#include <thread>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "whends/pipeline.hpp"

namespace whends {

// Rank-based (Mann-Whitney) AUC with ties contributing 1/2.
inline double auc_roc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeMismatch("auc_roc: scores vs labels");
  std::size_t pos = 0, neg = 0;
  for (int y : labels) (y ? pos : neg)++;
  if (pos == 0 || neg == 0) throw SingleClass("auc_roc: both classes required");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of positive ranks with midranks for ties.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum += midrank;
    i = j + 1;
  }
  const double u = rank_sum - 0.5 * static_cast<double>(pos) * (pos + 1);
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

inline double auc_roc(const std::vector<ScoredEdge>& scored) {
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& e : scored) {
    if (e.label < 0) continue;
    s.push_back(e.score);
    y.push_back(e.label);
  }
  return auc_roc(s, y);
}

// Fixed-precision score rows so identical runs serialize byte-identically.
inline void write_scores_csv(const std::vector<ScoredEdge>& scored, std::ostream& out) {
  out << "t,src,dst,score,label\n";
  char buf[64];
  for (const auto& e : scored) {
    std::snprintf(buf, sizeof(buf), "%.10f", e.score);
    out << e.t << "," << e.src << "," << e.dst << "," << buf << ",";
    if (e.label >= 0) out << e.label;
    out << "\n";
  }
}

struct ReportRow {
  std::string setting;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double runtime_s = 0.0;
  std::string error;  // nonempty when the point failed
};

struct ExperimentReport {
  std::string experiment;
  int schema_version = 1;
  std::vector<ReportRow> rows;

  bool any_error() const {
    for (const auto& r : rows)
      if (!r.error.empty()) return true;
    return false;
  }
};

enum class SweepAxis { kAnomalyRatio, kShiftSigma, kEmbeddingDim, kTrainRatio, kAblation };

inline SweepAxis parse_axis(const std::string& name) {
  if (name == "anomaly_ratio") return SweepAxis::kAnomalyRatio;
  if (name == "shift_sigma") return SweepAxis::kShiftSigma;
  if (name == "embedding_dim") return SweepAxis::kEmbeddingDim;
  if (name == "train_ratio") return SweepAxis::kTrainRatio;
  if (name == "ablation") return SweepAxis::kAblation;
  throw ConfigError("unknown sweep axis: " + name);
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::kShiftSigma;
  std::vector<std::string> values;      // axis values as strings
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainConfig base;
  SynthConfig synth;
  std::string ablate;  // when nonempty, run each value for {full, <ablate>}
  int jobs = 1;        // worker threads; points are independent
};

inline void apply_ablation(TrainConfig& cfg, const std::string& variant) {
  if (variant == "full") return;
  if (variant == "no_nsem") cfg.no_nsem = true;
  else if (variant == "no_gru") cfg.no_gru = true;
  else if (variant == "no_dataaug") cfg.no_dataaug = true;
  else if (variant == "simple_encoder") cfg.simple_encoder = true;
  else throw ConfigError("unknown ablation variant: " + variant);
}

// Builds data, trains, detects, and reports pooled AUC for one sweep point.
inline double run_point(const SweepSpec& spec, const std::string& value,
                        const std::string& variant, std::uint64_t seed) {
  TrainConfig cfg = spec.base;
  SynthConfig synth = spec.synth;
  cfg.seed = seed;
  synth.seed = seed;
  switch (spec.axis) {
    case SweepAxis::kAnomalyRatio: synth.anomaly_ratio = std::stod(value); break;
    case SweepAxis::kShiftSigma: synth.drift_sigma = std::stod(value); break;
    case SweepAxis::kEmbeddingDim:
      cfg.dim = std::stoi(value);
      synth.dim = std::stoi(value);
      break;
    case SweepAxis::kTrainRatio: {
      const double r = std::stod(value);
      if (r <= 0.0 || r >= 1.0) throw ConfigError("train_ratio out of range");
      break;
    }
    case SweepAxis::kAblation: apply_ablation(cfg, value); break;
  }
  apply_ablation(cfg, variant);
  SnapshotSequence seq = synth_nds_benchmark(synth);
  if (spec.axis == SweepAxis::kTrainRatio)
    seq.train_count = std::clamp(
        static_cast<int>(std::stod(value) * static_cast<double>(seq.snapshots.size())), 1,
        static_cast<int>(seq.snapshots.size()) - 1);
  ModelBundle bundle = train(seq, cfg);
  return auc_roc(detect(seq, bundle));
}

inline ExperimentReport run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw ConfigError("sweep values must be nonempty");
  ExperimentReport report;
  std::ostringstream id;
  switch (spec.axis) {
    case SweepAxis::kAnomalyRatio: id << "anomaly_ratio"; break;
    case SweepAxis::kShiftSigma: id << "shift_sigma"; break;
    case SweepAxis::kEmbeddingDim: id << "embedding_dim"; break;
    case SweepAxis::kTrainRatio: id << "train_ratio"; break;
    case SweepAxis::kAblation: id << "ablation"; break;
  }
  report.experiment = id.str();
  std::vector<std::string> variants = {"full"};
  if (!spec.ablate.empty()) variants.push_back(spec.ablate);

  struct Point {
    std::string value, variant;
    std::uint64_t seed;
  };
  std::vector<Point> points;
  for (const auto& value : spec.values)
    for (const auto& variant : variants)
      for (std::uint64_t seed : spec.seeds) points.push_back({value, variant, seed});

  report.rows.resize(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      const Point& pt = points[i];
      ReportRow row;
      row.setting = spec.ablate.empty() ? pt.value : pt.value + "/" + pt.variant;
      row.seed = pt.seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        row.auc = run_point(spec, pt.value, pt.variant, pt.seed);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.runtime_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.rows[i] = std::move(row);
    }
  };
  const int jobs = std::max(1, spec.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return report;
}

inline void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  out << "experiment,setting,seed,auc,runtime_s\n";
  for (const auto& r : report.rows) {
    out << report.experiment << "," << r.setting << "," << r.seed << ",";
    if (r.error.empty())
      out << std::fixed << std::setprecision(8) << r.auc;
    else
      out << "ERROR:" << r.error;
    out << "," << std::fixed << std::setprecision(3) << r.runtime_s << "\n";
  }
}

inline void write_report_json(const ExperimentReport& report, std::ostream& out) {
  out << "{\n  \"experiment\": \"" << report.experiment << "\",\n  \"schema_version\": "
      << report.schema_version << ",\n  \"rows\": [\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    out << "    {\"setting\": \"" << r.setting << "\", \"seed\": " << r.seed;
    if (r.error.empty())
      out << ", \"auc\": " << std::setprecision(10) << r.auc;
    else
      out << ", \"error\": \"" << r.error << "\"";
    out << ", \"runtime_s\": " << std::setprecision(6) << r.runtime_s << "}"
        << (i + 1 < report.rows.size() ? "," : "") << "\n";
  }
  out << "  ]\n}\n";
}

inline void write_report(const ExperimentReport& report, const std::string& path,
                         const std::string& format) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path);
  if (format == "csv") write_report_csv(report, out);
  else if (format == "json") write_report_json(report, out);
  else throw ConfigError("unknown report format: " + format);
}

}  // namespace whends

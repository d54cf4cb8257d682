#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mia/eval.hpp"
#include "mia/exec.hpp"
#include "mia/gbdt.hpp"

namespace mia {

struct ExperimentConfig {
  std::string corpus_path;
  std::string dataset_name;  // defaults to the corpus file stem
  std::array<double, 4> fractions = {0.4, 0.2, 0.2, 0.2};
  std::vector<uint64_t> seeds = {1, 2, 3};
  int lm_order = 5;
  double lm_alpha = 0.1;
  double k_percent = 20.0;
  std::vector<double> k_grid = {5.0, 10.0, 20.0, 50.0, 100.0};
  ParamGrid gbdt_grid;
  int cv_folds = 5;
  std::string output_dir = "out";
  std::string target_scores_path;     // optional external score file
  std::string reference_scores_path;  // optional external score file
  bool save_models = true;
  // Label for the report's params column. Defaults to the n-gram
  // descriptor, or the external target score file's model_id.
  std::string model_label;

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& json_text);
  static ExperimentConfig from_json_file(const std::string& path);
};

// Everything the report needs from one seed. Serialized to
// seed_<seed>/metrics.json; the `report` subcommand re-renders the
// aggregate files from these.
struct SeedResult {
  uint64_t seed = 0;
  GBDTParams chosen_params;
  size_t n_attack_train = 0;
  size_t n_attack_test = 0;
  // Keys: loss, ref, mink, zlib, em_mias.
  std::map<std::string, MetricsReport> test_metrics;
  std::vector<std::pair<double, double>> mink_sweep;  // (k, test AUC)
  std::vector<std::pair<double, double>> loss_threshold_sweep;
  std::vector<std::pair<double, double>> zlib_threshold_sweep;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;

  // Aggregated over seeds, per attack.
  std::map<std::string, Aggregate> auc;
  std::map<std::string, Aggregate> accuracy;

  std::string to_json() const;   // full report with provenance metadata
  std::string to_csv() const;    // dataset,params,loss,ref,mink,zlib,em_mias
};

inline constexpr const char* kAttackColumns[5] = {"loss", "ref", "mink",
                                                  "zlib", "em_mias"};

// Runs the full protocol: per seed make splits, train or load scores,
// featurize, cross-validated grid search on attack_train, fit, evaluate on
// attack_test; then aggregate across seeds. Artifacts land in
// config.output_dir; on failure partial outputs move to
// <output_dir>/quarantine and the error names the stage and seed.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                Exec exec = Exec::Parallel);

// Re-renders report.json / report.csv from a finished run directory.
ExperimentReport load_run_dir(const std::string& run_dir);
void write_report_files(const ExperimentReport& report,
                        const std::string& dir);

}  // namespace mia

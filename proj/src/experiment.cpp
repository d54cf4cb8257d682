#include "mia/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mia/compress.hpp"
#include "mia/error.hpp"
#include "mia/ngram.hpp"
#include "mia/split.hpp"
#include "mia/version.hpp"

namespace mia {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open file: " + path);
  }
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open file for writing: " + path.string());
  }
  out << content;
  if (!out) {
    throw Error("write failed: " + path.string());
  }
}

json params_to_json(const GBDTParams& p) {
  json j;
  j["n_trees"] = p.n_trees;
  j["max_depth"] = p.max_depth;
  j["learning_rate"] = p.learning_rate;
  j["lambda"] = p.lambda;
  j["gamma"] = p.gamma;
  j["min_child_weight"] = p.min_child_weight;
  j["seed"] = p.seed;
  return j;
}

GBDTParams params_from_json(const json& j) {
  GBDTParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.lambda = j.at("lambda").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  p.seed = j.at("seed").get<uint64_t>();
  return p;
}

json metrics_to_json(const MetricsReport& m) {
  json j;
  j["auc"] = m.auc;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["precision_undefined"] = m.precision_undefined;
  j["threshold"] = m.threshold;
  j["n_pos"] = m.n_pos;
  j["n_neg"] = m.n_neg;
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.auc = j.at("auc").get<double>();
  m.accuracy = j.at("accuracy").get<double>();
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.precision_undefined = j.at("precision_undefined").get<bool>();
  m.threshold = j.at("threshold").get<double>();
  m.n_pos = j.at("n_pos").get<size_t>();
  m.n_neg = j.at("n_neg").get<size_t>();
  return m;
}

json sweep_to_json(const std::vector<std::pair<double, double>>& sweep) {
  json arr = json::array();
  for (const auto& [x, y] : sweep) arr.push_back(json::array({x, y}));
  return arr;
}

std::vector<std::pair<double, double>> sweep_from_json(const json& arr) {
  std::vector<std::pair<double, double>> out;
  for (const json& e : arr) {
    out.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  }
  return out;
}

json seed_result_to_json(const SeedResult& r) {
  json j;
  j["seed"] = r.seed;
  j["chosen_params"] = params_to_json(r.chosen_params);
  j["n_attack_train"] = r.n_attack_train;
  j["n_attack_test"] = r.n_attack_test;
  json attacks;
  for (const auto& [name, metrics] : r.test_metrics) {
    attacks[name] = metrics_to_json(metrics);
  }
  j["attacks"] = std::move(attacks);
  json sweeps;
  sweeps["mink_auc"] = sweep_to_json(r.mink_sweep);
  sweeps["loss_threshold_accuracy"] = sweep_to_json(r.loss_threshold_sweep);
  sweeps["zlib_threshold_accuracy"] = sweep_to_json(r.zlib_threshold_sweep);
  j["sweeps"] = std::move(sweeps);
  return j;
}

SeedResult seed_result_from_json(const json& j) {
  SeedResult r;
  r.seed = j.at("seed").get<uint64_t>();
  r.chosen_params = params_from_json(j.at("chosen_params"));
  r.n_attack_train = j.at("n_attack_train").get<size_t>();
  r.n_attack_test = j.at("n_attack_test").get<size_t>();
  for (const auto& [name, metrics] : j.at("attacks").items()) {
    r.test_metrics[name] = metrics_from_json(metrics);
  }
  const json& sweeps = j.at("sweeps");
  r.mink_sweep = sweep_from_json(sweeps.at("mink_auc"));
  r.loss_threshold_sweep =
      sweep_from_json(sweeps.at("loss_threshold_accuracy"));
  r.zlib_threshold_sweep =
      sweep_from_json(sweeps.at("zlib_threshold_accuracy"));
  return r;
}

std::vector<double> linspace(double lo, double hi, size_t n) {
  std::vector<double> out;
  if (lo == hi || n == 1) {
    out.push_back(lo);
    return out;
  }
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    out.push_back(lo + (hi - lo) * static_cast<double>(i) /
                           static_cast<double>(n - 1));
  }
  return out;
}

std::string model_descriptor(const ExperimentConfig& cfg,
                             const ScoreFile* ext_target) {
  if (ext_target) return ext_target->model_id;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "ngram-o%d-a%g", cfg.lm_order, cfg.lm_alpha);
  return buf;
}

// Collects scores for the given attack docs, either from the external
// file (every doc must be present) or by scoring with the trained model.
std::vector<TokenScores> scores_for(
    const std::vector<Document>& docs, const ScoreFile* external,
    const NGramModel* model, const char* role, Exec exec) {
  if (external) {
    std::unordered_map<std::string, const TokenScores*> index;
    index.reserve(external->records.size());
    for (const TokenScores& rec : external->records) {
      index.emplace(rec.doc_id, &rec);
    }
    std::vector<TokenScores> out;
    out.reserve(docs.size());
    for (const Document& doc : docs) {
      auto it = index.find(doc.id);
      if (it == index.end()) {
        throw Error(std::string("external ") + role +
                    " score file is missing doc \"" + doc.id + "\"");
      }
      out.push_back(*it->second);
    }
    return out;
  }
  return score_corpus(*model, docs, exec);
}

SeedResult run_seed(const std::vector<Document>& corpus,
                    const ExperimentConfig& cfg, uint64_t seed,
                    const ScoreFile* ext_target, const ScoreFile* ext_ref,
                    Exec exec, const fs::path& seed_dir) {
  auto fail = [&](const char* stage, const std::exception& e) -> void {
    throw Error("stage " + std::string(stage) + " (seed " +
                std::to_string(seed) + "): " + e.what());
  };

  SeedResult result;
  result.seed = seed;
  fs::create_directories(seed_dir);

  SplitPlan plan;
  try {
    plan = make_splits(corpus, seed, cfg.fractions);
    write_file(seed_dir / "split_plan.json", plan.to_json());
  } catch (const std::exception& e) {
    fail("split", e);
  }

  std::unordered_map<std::string, const Document*> by_id;
  by_id.reserve(corpus.size());
  for (const Document& doc : corpus) by_id.emplace(doc.id, &doc);
  auto docs_of = [&](Partition p) {
    std::vector<Document> out;
    for (const std::string& id : plan.ids_of(p)) out.push_back(*by_id.at(id));
    return out;
  };

  std::vector<Document> attack_train_docs =
      labeled_attack_docs(corpus, plan.attack_train_examples);
  std::vector<Document> attack_test_docs =
      labeled_attack_docs(corpus, plan.attack_test_examples);
  result.n_attack_train = attack_train_docs.size();
  result.n_attack_test = attack_test_docs.size();

  std::vector<TokenScores> target_train, target_test, ref_train, ref_test;
  try {
    std::optional<NGramModel> target_model;
    std::optional<NGramModel> ref_model;
    if (!ext_target) {
      target_model = NGramModel::train(
          docs_of(Partition::MemberTrain), cfg.lm_order, cfg.lm_alpha,
          "target:" + model_descriptor(cfg, nullptr));
      if (cfg.save_models) {
        target_model->save_file((seed_dir / "target_model.bin").string());
      }
    }
    if (!ext_ref) {
      ref_model = NGramModel::train(
          docs_of(Partition::ReferenceTrain), cfg.lm_order, cfg.lm_alpha,
          "reference:" + model_descriptor(cfg, nullptr));
      if (cfg.save_models) {
        ref_model->save_file((seed_dir / "reference_model.bin").string());
      }
    }
    target_train =
        scores_for(attack_train_docs, ext_target,
                   target_model ? &*target_model : nullptr, "target", exec);
    target_test =
        scores_for(attack_test_docs, ext_target,
                   target_model ? &*target_model : nullptr, "target", exec);
    ref_train = scores_for(attack_train_docs, ext_ref,
                           ref_model ? &*ref_model : nullptr, "reference",
                           exec);
    ref_test = scores_for(attack_test_docs, ext_ref,
                          ref_model ? &*ref_model : nullptr, "reference",
                          exec);
  } catch (const std::exception& e) {
    fail("model_scoring", e);
  }

  std::vector<AttackFeatures> features_train, features_test;
  try {
    features_train = featurize_corpus(attack_train_docs, target_train,
                                      ref_train, cfg.k_percent, exec);
    features_test = featurize_corpus(attack_test_docs, target_test, ref_test,
                                     cfg.k_percent, exec);
    save_features_csv((seed_dir / "features_train.csv").string(),
                      features_train);
    save_features_csv((seed_dir / "features_test.csv").string(),
                      features_test);
  } catch (const std::exception& e) {
    fail("featurize", e);
  }

  CvResult cv;
  GBDTModel ensemble;
  try {
    cv = grid_search_cv(features_train, cfg.gbdt_grid, cfg.cv_folds, seed,
                        exec);
    result.chosen_params = cv.best;
    ensemble = GBDTModel::fit(features_train, cv.best, exec);
    write_file(seed_dir / "gbdt_model.json", ensemble.to_json());

    std::string cv_csv =
        "n_trees,max_depth,learning_rate,lambda,gamma,min_child_weight";
    for (int f = 0; f < cfg.cv_folds; ++f) {
      cv_csv += ",fold" + std::to_string(f) + "_auc";
    }
    cv_csv += ",mean_auc\n";
    char buf[256];
    for (const CvRow& row : cv.table) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%g,%g,%g,%g", row.params.n_trees,
                    row.params.max_depth, row.params.learning_rate,
                    row.params.lambda, row.params.gamma,
                    row.params.min_child_weight);
      cv_csv += buf;
      for (double auc : row.fold_auc) {
        std::snprintf(buf, sizeof(buf), ",%.6f", auc);
        cv_csv += buf;
      }
      std::snprintf(buf, sizeof(buf), ",%.6f\n", row.mean_auc);
      cv_csv += buf;
    }
    write_file(seed_dir / "cv_table.csv", cv_csv);
  } catch (const std::exception& e) {
    fail("grid_search", e);
  }

  try {
    // Ensemble metrics at probability threshold 0.5.
    const std::vector<double> probas =
        ensemble.predict_proba_batch(features_test, exec);
    std::vector<ScoredExample> em_scored;
    em_scored.reserve(features_test.size());
    for (size_t i = 0; i < features_test.size(); ++i) {
      em_scored.push_back({features_test[i].doc_id, probas[i],
                           features_test[i].label.value_or(0)});
    }
    result.test_metrics["em_mias"] = confusion_metrics(em_scored, 0.5);

    // Single attacks: threshold chosen on attack_train only.
    for (Attack atk :
         {Attack::Loss, Attack::Ref, Attack::Mink, Attack::Zlib}) {
      const auto train_scored = single_attack_scores(features_train, atk);
      const double thr = best_balanced_accuracy_threshold(train_scored);
      const auto test_scored = single_attack_scores(features_test, atk);
      result.test_metrics[attack_name(atk)] =
          confusion_metrics(test_scored, thr);
    }

    std::vector<int> test_labels;
    test_labels.reserve(attack_test_docs.size());
    for (const Document& doc : attack_test_docs) {
      test_labels.push_back(doc.label.value_or(0));
    }
    result.mink_sweep = sweep_mink_auc(target_test, test_labels, cfg.k_grid);

    for (Attack atk : {Attack::Loss, Attack::Zlib}) {
      const auto scored = single_attack_scores(features_test, atk);
      double lo = scored.front().score, hi = scored.front().score;
      for (const ScoredExample& e : scored) {
        lo = std::min(lo, e.score);
        hi = std::max(hi, e.score);
      }
      const auto sweep =
          sweep_threshold_accuracy(scored, linspace(lo, hi, 21));
      (atk == Attack::Loss ? result.loss_threshold_sweep
                           : result.zlib_threshold_sweep) = sweep;
    }

    write_file(seed_dir / "metrics.json", seed_result_to_json(result).dump(2));
  } catch (const std::exception& e) {
    fail("evaluate", e);
  }
  return result;
}

void aggregate_report(ExperimentReport& report) {
  for (const char* attack : kAttackColumns) {
    std::vector<double> aucs, accs;
    for (const SeedResult& r : report.seeds) {
      auto it = r.test_metrics.find(attack);
      if (it == r.test_metrics.end()) {
        throw Error(std::string("seed result is missing attack \"") + attack +
                    "\"");
      }
      aucs.push_back(it->second.auc);
      accs.push_back(it->second.accuracy);
    }
    report.auc[attack] = aggregate_runs(aucs);
    report.accuracy[attack] = aggregate_runs(accs);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (corpus_path.empty()) {
    throw Error("config: corpus path is required");
  }
  if (seeds.empty()) {
    throw Error("config: seed list must be non-empty");
  }
  if (lm_order < 1) {
    throw Error("config: lm order must be >= 1");
  }
  if (!(lm_alpha > 0.0)) {
    throw Error("config: lm alpha must be > 0");
  }
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw Error("config: k_percent must lie in (0,100]");
  }
  for (double k : k_grid) {
    if (!(k > 0.0 && k <= 100.0)) {
      throw Error("config: k grid values must lie in (0,100]");
    }
  }
  if (cv_folds < 2) {
    throw Error("config: cv_folds must be >= 2");
  }
  if (output_dir.empty()) {
    throw Error("config: output_dir is required");
  }
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["corpus"] = corpus_path;
  j["dataset_name"] = dataset_name;
  j["fractions"] = fractions;
  j["seeds"] = seeds;
  j["lm"] = json{{"order", lm_order}, {"alpha", lm_alpha}};
  j["k_percent"] = k_percent;
  j["k_grid"] = k_grid;
  j["gbdt_grid"] = json{{"n_trees", gbdt_grid.n_trees},
                        {"max_depth", gbdt_grid.max_depth},
                        {"learning_rate", gbdt_grid.learning_rate},
                        {"lambda", gbdt_grid.lambda},
                        {"gamma", gbdt_grid.gamma},
                        {"min_child_weight", gbdt_grid.min_child_weight}};
  j["cv_folds"] = cv_folds;
  j["output_dir"] = output_dir;
  j["external_scores"] = json{{"target", target_scores_path},
                              {"reference", reference_scores_path}};
  j["save_models"] = save_models;
  j["model_label"] = model_label;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed config JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.corpus_path = j.value("corpus", "");
  cfg.dataset_name = j.value("dataset_name", "");
  if (j.contains("fractions")) {
    cfg.fractions = j.at("fractions").get<std::array<double, 4>>();
  }
  if (j.contains("seeds")) {
    cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  }
  if (j.contains("lm")) {
    cfg.lm_order = j.at("lm").value("order", cfg.lm_order);
    cfg.lm_alpha = j.at("lm").value("alpha", cfg.lm_alpha);
  }
  cfg.k_percent = j.value("k_percent", cfg.k_percent);
  if (j.contains("k_grid")) {
    cfg.k_grid = j.at("k_grid").get<std::vector<double>>();
  }
  if (j.contains("gbdt_grid")) {
    const json& g = j.at("gbdt_grid");
    if (g.contains("n_trees")) cfg.gbdt_grid.n_trees = g.at("n_trees").get<std::vector<int>>();
    if (g.contains("max_depth")) cfg.gbdt_grid.max_depth = g.at("max_depth").get<std::vector<int>>();
    if (g.contains("learning_rate")) cfg.gbdt_grid.learning_rate = g.at("learning_rate").get<std::vector<double>>();
    if (g.contains("lambda")) cfg.gbdt_grid.lambda = g.at("lambda").get<std::vector<double>>();
    if (g.contains("gamma")) cfg.gbdt_grid.gamma = g.at("gamma").get<std::vector<double>>();
    if (g.contains("min_child_weight")) cfg.gbdt_grid.min_child_weight = g.at("min_child_weight").get<std::vector<double>>();
  }
  cfg.cv_folds = j.value("cv_folds", cfg.cv_folds);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (j.contains("external_scores")) {
    cfg.target_scores_path = j.at("external_scores").value("target", "");
    cfg.reference_scores_path = j.at("external_scores").value("reference", "");
  }
  cfg.save_models = j.value("save_models", cfg.save_models);
  cfg.model_label = j.value("model_label", "");
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  return from_json(read_file(path));
}

std::string ExperimentReport::to_json() const {
  json j;
  j["toolkit_version"] = kToolkitVersion;
  j["config"] = json::parse(config.to_json());
  json meta;
  meta["compression"] =
      json{{"wrapper", kDeflateWrapper}, {"level", kDeflateLevel}};
  meta["loss_aggregation"] = "mean_per_token_nats";
  meta["zlib_numerator"] = "total_nll_nats";
  meta["mink_space"] = "log_probability";
  meta["auc_ties"] = "half_credit";
  meta["single_attack_threshold"] = "max_balanced_accuracy_on_attack_train";
  meta["ensemble_threshold"] = 0.5;
  meta["sweep_interpretation"] =
      "mink sweeps its k parameter (AUC per k); loss and zlib sweep the "
      "decision threshold (accuracy per threshold)";
  meta["attack_sets"] =
      "label-balanced: members drawn from member_train, non-members from "
      "the attack partitions";
  j["metadata"] = std::move(meta);
  json seeds_json = json::array();
  for (const SeedResult& r : seeds) seeds_json.push_back(seed_result_to_json(r));
  j["seeds"] = std::move(seeds_json);
  json agg;
  for (const auto& [attack, a] : auc) {
    agg["auc"][attack] = json{{"mean", a.mean}};
    if (a.stddev) agg["auc"][attack]["std"] = *a.stddev;
  }
  for (const auto& [attack, a] : accuracy) {
    agg["accuracy"][attack] = json{{"mean", a.mean}};
    if (a.stddev) agg["accuracy"][attack]["std"] = *a.stddev;
  }
  j["aggregate"] = std::move(agg);
  return j.dump(2);
}

std::string ExperimentReport::to_csv() const {
  std::string csv = "dataset,params,loss,ref,mink,zlib,em_mias\n";
  csv += config.dataset_name.empty() ? "corpus" : config.dataset_name;
  csv += ",";
  csv += config.model_label.empty() ? model_descriptor(config, nullptr)
                                    : config.model_label;
  for (const char* attack : kAttackColumns) {
    csv += "," + auc.at(attack).format(3);
  }
  csv += "\n";
  return csv;
}

ExperimentReport run_experiment(const ExperimentConfig& config, Exec exec) {
  config.validate();

  const std::vector<Document> corpus = load_corpus(config.corpus_path);
  if (corpus.empty()) {
    throw Error("corpus is empty: " + config.corpus_path);
  }

  std::optional<ScoreFile> ext_target, ext_ref;
  if (!config.target_scores_path.empty()) {
    ext_target = load_scores(config.target_scores_path);
  }
  if (!config.reference_scores_path.empty()) {
    ext_ref = load_scores(config.reference_scores_path);
  }

  ExperimentReport report;
  report.config = config;
  if (report.config.dataset_name.empty()) {
    report.config.dataset_name =
        fs::path(config.corpus_path).stem().string();
  }
  if (ext_target) {
    // Table rows name the externally scored model.
    报;
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  const fs::path staging = out_dir / "partial";
  fs::remove_all(staging);
  fs::create_directories(staging);

  try {
    write_file(staging / "config.json", report.config.to_json());
    for (uint64_t seed : config.seeds) {
      const fs::path seed_dir =
          staging / ("seed_" + std::to_string(seed));
      report.seeds.push_back(run_seed(corpus, report.config, seed,
                                      ext_target ? &*ext_target : nullptr,
                                      ext_ref ? &*ext_ref : nullptr, exec,
                                      seed_dir));
    }
    aggregate_report(report);
    write_report_files(report, staging.string());
  } catch (...) {
    const fs::path quarantine = out_dir / "quarantine";
    fs::remove_all(quarantine);
    fs::rename(staging, quarantine);
    throw;
  }

  // Success: promote staged artifacts to the run directory root.
  for (const fs::directory_entry& entry : fs::directory_iterator(staging)) {
    const fs::path dest = out_dir / entry.path().filename();
    fs::remove_all(dest);
    fs::rename(entry.path(), dest);
  }
  fs::remove(staging);
  return report;
}

ExperimentReport load_run_dir(const std::string& run_dir) {
  const fs::path dir(run_dir);
  ExperimentReport report;
  report.config =
      ExperimentConfig::from_json_file((dir / "config.json").string());
  for (uint64_t seed : report.config.seeds) {
    const fs::path metrics =
        dir / ("seed_" + std::to_string(seed)) / "metrics.json";
    json j;
    try {
      j = json::parse(read_file(metrics.string()));
    } catch (const json::exception& e) {
      throw Error("malformed metrics JSON at " + metrics.string() + ": " +
                  e.what());
    }
    report.seeds.push_back(seed_result_from_json(j));
  }
  aggregate_report(report);
  return report;
}

void write_report_files(const ExperimentReport& report,
                        const std::string& dir) {
  write_file(fs::path(dir) / "report.json", report.to_json());
  write_file(fs::path(dir) / "report.csv", report.to_csv());
}

}  // namespace mia

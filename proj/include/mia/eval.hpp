#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mia/features.hpp"
#include "mia/scores.hpp"

namespace mia {

// Higher score = more member-like.
struct ScoredExample {
  std::string doc_id;
  double score = 0.0;
  int label = 0;
};

struct MetricsReport {
  double auc = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no predicted positives
  double threshold = 0.0;
  size_t n_pos = 0;
  size_t n_neg = 0;
};

enum class Attack { Loss, Ref, Mink, Zlib };

const char* attack_name(Attack a);
Attack attack_from_name(const std::string& name);

// Mann-Whitney rank statistic with half credit for ties, computed by
// sorting in O(n log n). Both labels must be present.
double auc_roc(const std::vector<ScoredExample>& examples);

// Predict 1 iff score >= threshold. Precision with zero predicted
// positives is reported as 0 with the undefined flag set, so downstream
// CSVs stay numeric.
MetricsReport confusion_metrics(const std::vector<ScoredExample>& examples,
                                double threshold);

// Single-attack baseline scores with the orientation fixed so that higher
// means member-like: -f_loss, -f_ref, +f_mink, -f_zlib.
std::vector<ScoredExample> single_attack_scores(
    const std::vector<AttackFeatures>& features, Attack attack);

// Threshold on the raw score maximizing balanced accuracy (TPR+TNR)/2.
// Candidates are midpoints between consecutive distinct sorted scores plus
// the extremes; ties resolved toward the lowest threshold.
double best_balanced_accuracy_threshold(
    const std::vector<ScoredExample>& examples);

// Min-k% sweep: recomputes f_mink at each k from stored token scores and
// reports the attack AUC per k. labels[i] pairs with scores[i].
std::vector<std::pair<double, double>> sweep_mink_auc(
    const std::vector<TokenScores>& scores, const std::vector<int>& labels,
    const std::vector<double>& k_grid);

// Decision-threshold sweep for attacks without an internal hyperparameter:
// accuracy at each threshold over the score range.
std::vector<std::pair<double, double>> sweep_threshold_accuracy(
    const std::vector<ScoredExample>& examples,
    const std::vector<double>& thresholds);

// Mean and sample standard deviation (n-1 denominator). With one run the
// std is absent.
struct Aggregate {
  double mean = 0.0;
  std::optional<double> stddev;

  std::string format(int decimals = 3) const;  // "m±s" / "m"
};

Aggregate aggregate_runs(const std::vector<double>& values);

}  // namespace mia

#include "mia/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mia/error.hpp"

namespace mia {

const char* attack_name(Attack a) {
  switch (a) {
    case Attack::Loss: return "loss";
    case Attack::Ref: return "ref";
    case Attack::Mink: return "mink";
    case Attack::Zlib: return "zlib";
  }
  return "?";
}

Attack attack_from_name(const std::string& name) {
  if (name == "loss") return Attack::Loss;
  if (name == "ref") return Attack::Ref;
  if (name == "mink") return Attack::Mink;
  if (name == "zlib") return Attack::Zlib;
  throw Error("unknown attack name: \"" + name + "\"");
}

namespace {

void require_both_labels(const std::vector<ScoredExample>& examples,
                         const char* op) {
  size_t pos = 0, neg = 0;
  for (const ScoredExample& e : examples) {
    if (!std::isfinite(e.score)) {
      throw Error(std::string(op) + ": non-finite score for doc \"" +
                  e.doc_id + "\"");
    }
    (e.label == 1 ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) {
    throw Error(std::string(op) + ": both labels must be present (" +
                std::to_string(pos) + " positive, " + std::to_string(neg) +
                " negative)");
  }
}

}  // namespace

double auc_roc(const std::vector<ScoredExample>& examples) {
  require_both_labels(examples, "auc_roc");
  // Rank-sum with average ranks over tied blocks. All intermediate values
  // are half-integers, so the result is exact and matches pair counting.
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (examples[a].score != examples[b].score) {
      return examples[a].score < examples[b].score;
    }
    return a < b;
  });
  double rank_sum_pos = 0.0;
  size_t n_pos = 0, n_neg = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() &&
           examples[order[j]].score == examples[order[i]].score) {
      ++j;
    }
    // 1-based ranks i+1 .. j share the average rank.
    const double avg_rank = (static_cast<double>(i + 1) +
                             static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) {
      if (examples[order[k]].label == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      } else {
        ++n_neg;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

MetricsReport confusion_metrics(const std::vector<ScoredExample>& examples,
                                double threshold) {
  require_both_labels(examples, "confusion_metrics");
  size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const ScoredExample& e : examples) {
    const bool pred = e.score >= threshold;
    if (e.label == 1) {
      (pred ? tp : fn) += 1;
    } else {
      (pred ? fp : tn) += 1;
    }
  }
  MetricsReport m;
  m.threshold = threshold;
  m.n_pos = tp + fn;
  m.n_neg = fp + tn;
  m.auc = auc_roc(examples);
  const double total = static_cast<double>(tp + fp + fn + tn);
  m.accuracy = static_cast<double>(tp + tn) / total;
  if (tp + fp == 0) {
    m.precision = 0.0;
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

std::vector<ScoredExample> single_attack_scores(
    const std::vector<AttackFeatures>& features, Attack attack) {
  if (features.empty()) {
    throw Error("single_attack_scores: empty feature list");
  }
  std::vector<ScoredExample> out;
  out.reserve(features.size());
  for (const AttackFeatures& f : features) {
    ScoredExample e;
    e.doc_id = f.doc_id;
    e.label = f.label.value_or(0);
    switch (attack) {
      case Attack::Loss: e.score = -f.f_loss; break;
      case Attack::Ref: e.score = -f.f_ref; break;
      case Attack::Mink: e.score = f.f_mink; break;
      case Attack::Zlib: e.score = -f.f_zlib; break;
    }
    out.push_back(std::move(e));
  }
  return out;
}

double best_balanced_accuracy_threshold(
    const std::vector<ScoredExample>& examples) {
  require_both_labels(examples, "best_balanced_accuracy_threshold");
  std::vector<double> scores;
  scores.reserve(examples.size());
  for (const ScoredExample& e : examples) scores.push_back(e.score);
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());

  std::vector<double> candidates;
  candidates.push_back(scores.front() - 1.0);  // predict everything positive
  for (size_t i = 0; i + 1 < scores.size(); ++i) {
    candidates.push_back((scores[i] + scores[i + 1]) / 2.0);
  }
  candidates.push_back(scores.back() + 1.0);  // predict everything negative

  double best_thr = candidates.front();
  double best_bacc = -1.0;
  for (double thr : candidates) {
    size_t tp = 0, fn = 0, fp = 0, tn = 0;
    for (const ScoredExample& e : examples) {
      const bool pred = e.score >= thr;
      if (e.label == 1) {
        (pred ? tp : fn) += 1;
      } else {
        (pred ? fp : tn) += 1;
      }
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double tnr = static_cast<double>(tn) / static_cast<double>(fp + tn);
    const double bacc = (tpr + tnr) / 2.0;
    if (bacc > best_bacc) {
      best_bacc = bacc;
      best_thr = thr;
    }
  }
  return best_thr;
}

std::vector<std::pair<double, double>> sweep_mink_auc(
    const std::vector<TokenScores>& scores, const std::vector<int>& labels,
    const std::vector<double>& k_grid) {
  if (scores.size() != labels.size()) {
    throw Error("sweep_mink_auc: scores and labels sizes differ");
  }
  if (k_grid.empty()) {
    throw Error("sweep_mink_auc: empty k grid");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(k_grid.size());
  for (double k : k_grid) {
    std::vector<ScoredExample> ex;
    ex.reserve(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
      ex.push_back({scores[i].doc_id, mink_feature(scores[i], k), labels[i]});
    }
    out.emplace_back(k, auc_roc(ex));
  }
  return out;
}

std::vector<std::pair<double, double>> sweep_threshold_accuracy(
    const std::vector<ScoredExample>& examples,
    const std::vector<double>& thresholds) {
  if (thresholds.empty()) {
    throw Error("sweep_threshold_accuracy: empty threshold grid");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(thresholds.size());
  for (double thr : thresholds) {
    out.emplace_back(thr, confusion_metrics(examples, thr).accuracy);
  }
  return out;
}

Aggregate aggregate_runs(const std::vector<double>& values) {
  if (values.empty()) {
    throw Error("aggregate_runs: no values");
  }
  Aggregate agg;
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) {
      const double d = v - agg.mean;
      ss += d * d;
    }
    agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return agg;
}

std::string Aggregate::format(int decimals) const {
  char buf[64];
  if (stddev) {
    std::snprintf(buf, sizeof(buf), "%.*f±%.*f", decimals, mean, decimals,
                  *stddev);
  } else {
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, mean);
  }
  return buf;
}

}  // namespace mia

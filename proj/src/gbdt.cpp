#include "mia/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/eval.hpp"
#include "mia/prng.hpp"

namespace mia {

using nlohmann::json;

namespace {

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double logistic_loss_mean(const std::vector<double>& margins,
                          const std::vector<int>& labels) {
  double sum = 0.0;
  for (size_t i = 0; i < margins.size(); ++i) {
    sum += labels[i] == 1 ? softplus(-margins[i]) : softplus(margins[i]);
  }
  return sum / static_cast<double>(margins.size());
}

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = -std::numeric_limits<double>::infinity();
  double h_left = 0.0;
  double h_right = 0.0;
};

// Total order for the reduction over per-feature candidates: higher gain
// wins, then lower feature index, then lower threshold.
bool better(const SplitCandidate& a, const SplitCandidate& b) {
  if (!b.found) return a.found;
  if (!a.found) return false;
  if (a.gain != b.gain) return a.gain > b.gain;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<AttackFeatures>& data,
              const std::vector<double>& grad, const std::vector<double>& hess,
              const GBDTParams& params, Exec exec, FitTrace* trace)
      : data_(data),
        grad_(grad),
        hess_(hess),
        params_(params),
        exec_(exec),
        trace_(trace) {}

  Tree build(std::vector<size_t> indices, std::vector<int>* leaf_of) {
    tree_.nodes.clear();
    leaf_of_ = leaf_of;
    grow(std::move(indices), 0);
    return std::move(tree_);
  }

 private:
  // Returns the node index. depth is the number of splits above this node.
  int grow(std::vector<size_t> indices, int depth) {
    NodeStats stats;
    for (size_t i : indices) {
      stats.g += grad_[i];
      stats.h += hess_[i];
    }
    const int node_idx = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    SplitCandidate best;
    if (depth < params_.max_depth && indices.size() >= 2) {
      best = find_best_split(indices, stats);
    }
    if (!best.found) {
      make_leaf(node_idx, indices, stats);
      return node_idx;
    }

    std::vector<size_t> left_idx, right_idx;
    left_idx.reserve(indices.size());
    right_idx.reserve(indices.size());
    for (size_t i : indices) {
      if (data_[i][static_cast<size_t>(best.feature)] < best.threshold) {
        left_idx.push_back(i);
      } else {
        right_idx.push_back(i);
      }
    }
    indices.clear();
    indices.shrink_to_fit();

    if (trace_) {
      trace_->splits.push_back({best.gain, best.h_left, best.h_right});
    }
    tree_.nodes[static_cast<size_t>(node_idx)].is_leaf = false;
    tree_.nodes[static_cast<size_t>(node_idx)].feature = best.feature;
    tree_.nodes[static_cast<size_t>(node_idx)].threshold = best.threshold;
    const int left = grow(std::move(left_idx), depth + 1);
    tree_.nodes[static_cast<size_t>(node_idx)].left = left;
    const int right = grow(std::move(right_idx), depth + 1);
    tree_.nodes[static_cast<size_t>(node_idx)].right = right;
    return node_idx;
  }

  void make_leaf(int node_idx, const std::vector<size_t>& indices,
                 const NodeStats& stats) {
    TreeNode& node = tree_.nodes[static_cast<size_t>(node_idx)];
    node.is_leaf = true;
    node.weight = -stats.g / (stats.h + params_.lambda);
    if (trace_) {
      trace_->leaves.push_back({stats.g, stats.h, node.weight});
    }
    if (leaf_of_) {
      for (size_t i : indices) (*leaf_of_)[i] = node_idx;
    }
  }

  SplitCandidate find_best_split(const std::vector<size_t>& indices,
                                 const NodeStats& stats) {
    SplitCandidate per_feature[kNumFeatures];
    const bool par = exec_ == Exec::Parallel;
#pragma omp parallel for schedule(static) if (par)
    for (int f = 0; f < static_cast<int>(kNumFeatures); ++f) {
      per_feature[f] = best_split_for_feature(indices, stats, f);
    }
    SplitCandidate best;
    for (const SplitCandidate& c : per_feature) {
      if (better(c, best)) best = c;
    }
    return best;
  }

  SplitCandidate best_split_for_feature(const std::vector<size_t>& indices,
                                        const NodeStats& stats, int feature) {
    std::vector<size_t> sorted = indices;
    std::sort(sorted.begin(), sorted.end(), [&](size_t a, size_t b) {
      const double va = data_[a][static_cast<size_t>(feature)];
      const double vb = data_[b][static_cast<size_t>(feature)];
      if (va != vb) return va < vb;
      return a < b;
    });

    SplitCandidate best;
    double g_left = 0.0;
    double h_left = 0.0;
    const double parent_score =
        stats.g * stats.g / (stats.h + params_.lambda);
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
      g_left += grad_[sorted[i]];
      h_left += hess_[sorted[i]];
      const double v = data_[sorted[i]][static_cast<size_t>(feature)];
      const double v_next = data_[sorted[i + 1]][static_cast<size_t>(feature)];
      if (v == v_next) continue;
      const double threshold = (v + v_next) / 2.0;
      // Guard against midpoint rounding onto either endpoint: routing uses
      // x < threshold, which must reproduce this prefix exactly.
      if (!(v < threshold && threshold <= v_next)) continue;
      const double g_right = stats.g - g_left;
      const double h_right = stats.h - h_left;
      if (h_left < params_.min_child_weight ||
          h_right < params_.min_child_weight) {
        continue;
      }
      const double gain =
          0.5 * (g_left * g_left / (h_left + params_.lambda) +
                 g_right * g_right / (h_right + params_.lambda) -
                 parent_score) -
          params_.gamma;
      if (gain <= 0.0) continue;
      SplitCandidate cand;
      cand.found = true;
      cand.feature = feature;
      cand.threshold = threshold;
      cand.gain = gain;
      cand.h_left = h_left;
      cand.h_right = h_right;
      if (better(cand, best)) best = cand;
    }
    return best;
  }

  const std::vector<AttackFeatures>& data_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const GBDTParams& params_;
  Exec exec_;
  FitTrace* trace_;
  Tree tree_;
  std::vector<int>* leaf_of_ = nullptr;
};

}  // namespace

void GBDTParams::validate() const {
  if (n_trees < 1) throw Error("gbdt params: n_trees must be >= 1");
  if (max_depth < 1) throw Error("gbdt params: max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw Error("gbdt params: learning_rate must lie in (0,1]");
  }
  if (!(lambda >= 0.0)) throw Error("gbdt params: lambda must be >= 0");
  if (!(gamma >= 0.0)) throw Error("gbdt params: gamma must be >= 0");
  if (!(min_child_weight >= 0.0)) {
    throw Error("gbdt params: min_child_weight must be >= 0");
  }
}

std::string GBDTParams::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "trees=%d depth=%d eta=%g lambda=%g gamma=%g mcw=%g", n_trees,
                max_depth, learning_rate, lambda, gamma, min_child_weight);
  return buf;
}

double Tree::predict(const AttackFeatures& x) const {
  int idx = 0;
  while (!nodes[static_cast<size_t>(idx)].is_leaf) {
    const TreeNode& node = nodes[static_cast<size_t>(idx)];
    idx = x[static_cast<size_t>(node.feature)] < node.threshold ? node.left
                                                                : node.right;
  }
  return nodes[static_cast<size_t>(idx)].weight;
}

GBDTModel GBDTModel::fit(const std::vector<AttackFeatures>& data,
                         const GBDTParams& params, Exec exec,
                         FitTrace* trace) {
  params.validate();
  if (data.size() < 2) {
    throw Error("gbdt fit: need at least 2 examples");
  }
  size_t n_pos = 0;
  for (const AttackFeatures& f : data) {
    if (!f.label) {
      throw Error("gbdt fit: unlabeled example \"" + f.doc_id + "\"");
    }
    for (size_t k = 0; k < kNumFeatures; ++k) {
      if (!std::isfinite(f[k])) {
        throw Error("gbdt fit: non-finite feature " +
                    std::string(kFeatureNames[k]) + " for doc \"" + f.doc_id +
                    "\"");
      }
    }
    if (*f.label == 1) ++n_pos;
  }
  if (n_pos == 0 || n_pos == data.size()) {
    throw Error("gbdt fit: both labels must be present");
  }

  const size_t n = data.size();
  std::vector<int> labels(n);
  for (size_t i = 0; i < n; ++i) labels[i] = *data[i].label;

  GBDTModel model;
  model.params_ = params;
  const double prevalence =
      static_cast<double>(n_pos) / static_cast<double>(n);
  model.base_margin_ = std::log(prevalence / (1.0 - prevalence));

  std::vector<double> margins(n, model.base_margin_);
  std::vector<double> grad(n), hess(n);
  std::vector<int> leaf_of(n);
  std::vector<size_t> all_indices(n);
  std::iota(all_indices.begin(), all_indices.end(), 0);

  const bool par = exec == Exec::Parallel;
  for (int round = 0; round < params.n_trees; ++round) {
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
      const double p = sigmoid(margins[static_cast<size_t>(i)]);
      grad[static_cast<size_t>(i)] =
          p - static_cast<double>(labels[static_cast<size_t>(i)]);
      hess[static_cast<size_t>(i)] = p * (1.0 - p);
    }
    TreeBuilder builder(data, grad, hess, params, exec, trace);
    Tree tree = builder.build(all_indices, &leaf_of);
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
      const double w =
          tree.nodes[static_cast<size_t>(leaf_of[static_cast<size_t>(i)])]
              .weight;
      margins[static_cast<size_t>(i)] += params.learning_rate * w;
    }
    model.trees_.push_back(std::move(tree));
    if (trace) {
      trace->round_loss.push_back(logistic_loss_mean(margins, labels));
    }
  }
  return model;
}

double GBDTModel::predict_margin(const AttackFeatures& x) const {
  for (size_t k = 0; k < kNumFeatures; ++k) {
    if (!std::isfinite(x[k])) {
      throw Error("gbdt predict: non-finite feature " +
                  std::string(kFeatureNames[k]) + " for doc \"" + x.doc_id +
                  "\"");
    }
  }
  double sum = 0.0;
  for (const Tree& tree : trees_) sum += tree.predict(x);
  return base_margin_ + params_.learning_rate * sum;
}

double GBDTModel::predict_proba(const AttackFeatures& x) const {
  const double p = sigmoid(predict_margin(x));
  // Keep the output strictly inside (0,1) even for saturated margins.
  return std::min(1.0 - 1e-15, std::max(1e-15, p));
}

std::vector<double> GBDTModel::predict_proba_batch(
    const std::vector<AttackFeatures>& xs, Exec exec) const {
  std::vector<double> out(xs.size());
  const bool par = exec == Exec::Parallel;
  std::string first_error;
  int64_t first_error_idx = static_cast<int64_t>(xs.size());
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < static_cast<int64_t>(xs.size()); ++i) {
    try {
      out[static_cast<size_t>(i)] = predict_proba(xs[static_cast<size_t>(i)]);
    } catch (const std::exception& e) {
#pragma omp critical(mia_predict_error)
      if (i < first_error_idx) {
        first_error_idx = i;
        first_error = e.what();
      }
    }
  }
  if (first_error_idx < static_cast<int64_t>(xs.size())) {
    throw Error(first_error);
  }
  return out;
}

std::string GBDTModel::to_json() const {
  json obj;
  obj["format"] = "miaudit-gbdt";
  obj["format_version"] = kFormatVersion;
  json p;
  p["n_trees"] = params_.n_trees;
  p["max_depth"] = params_.max_depth;
  p["learning_rate"] = params_.learning_rate;
  p["lambda"] = params_.lambda;
  p["gamma"] = params_.gamma;
  p["min_child_weight"] = params_.min_child_weight;
  p["seed"] = params_.seed;
  obj["params"] = std::move(p);
  obj["base_margin"] = base_margin_;
  json trees = json::array();
  for (const Tree& tree : trees_) {
    json nodes = json::array();
    for (const TreeNode& node : tree.nodes) {
      json jn;
      if (node.is_leaf) {
        jn["weight"] = node.weight;
      } else {
        jn["feature"] = node.feature;
        jn["threshold"] = node.threshold;
        jn["left"] = node.left;
        jn["right"] = node.right;
      }
      nodes.push_back(std::move(jn));
    }
    trees.push_back(json{{"nodes", std::move(nodes)}});
  }
  obj["trees"] = std::move(trees);
  return obj.dump(2);
}

GBDTModel GBDTModel::from_json(const std::string& json_text) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed gbdt model JSON: ") + e.what());
  }
  if (obj.value("format", "") != "miaudit-gbdt") {
    throw Error("gbdt model: missing or wrong format marker");
  }
  const uint32_t version = obj.value("format_version", 0u);
  if (version > kFormatVersion) {
    throw Error("gbdt model: file format version " + std::to_string(version) +
                " is newer than supported version " +
                std::to_string(kFormatVersion));
  }
  GBDTModel model;
  const json& p = obj.at("params");
  model.params_.n_trees = p.at("n_trees").get<int>();
  model.params_.max_depth = p.at("max_depth").get<int>();
  model.params_.learning_rate = p.at("learning_rate").get<double>();
  model.params_.lambda = p.at("lambda").get<double>();
  model.params_.gamma = p.at("gamma").get<double>();
  model.params_.min_child_weight = p.at("min_child_weight").get<double>();
  model.params_.seed = p.at("seed").get<uint64_t>();
  model.base_margin_ = obj.at("base_margin").get<double>();
  for (const json& jt : obj.at("trees")) {
    Tree tree;
    for (const json& jn : jt.at("nodes")) {
      TreeNode node;
      if (jn.contains("weight")) {
        node.is_leaf = true;
        node.weight = jn.at("weight").get<double>();
      } else {
        node.is_leaf = false;
        node.feature = jn.at("feature").get<int>();
        node.threshold = jn.at("threshold").get<double>();
        node.left = jn.at("left").get<int>();
        node.right = jn.at("right").get<int>();
        if (node.feature < 0 ||
            node.feature >= static_cast<int>(kNumFeatures)) {
          throw Error("gbdt model: feature index out of range");
        }
      }
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) {
      throw Error("gbdt model: empty tree");
    }
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf &&
          (node.left < 0 || node.right < 0 ||
           node.left >= static_cast<int>(tree.nodes.size()) ||
           node.right >= static_cast<int>(tree.nodes.size()))) {
        throw Error("gbdt model: child index out of range");
      }
    }
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

std::vector<GBDTParams> ParamGrid::expand(uint64_t seed) const {
  if (n_trees.empty() || max_depth.empty() || learning_rate.empty() ||
      lambda.empty() || gamma.empty() || min_child_weight.empty()) {
    throw Error("param grid: every dimension needs at least one value");
  }
  std::vector<GBDTParams> out;
  for (int nt : n_trees) {
    for (int md : max_depth) {
      for (double lr : learning_rate) {
        for (double l2 : lambda) {
          for (double g : gamma) {
            for (double mcw : min_child_weight) {
              GBDTParams p;
              p.n_trees = nt;
              p.max_depth = md;
              p.learning_rate = lr;
              p.lambda = l2;
              p.gamma = g;
              p.min_child_weight = mcw;
              p.seed = seed;
              p.validate();
              out.push_back(p);
            }
          }
        }
      }
    }
  }
  return out;
}

CvResult grid_search_cv(const std::vector<AttackFeatures>& data,
                        const ParamGrid& grid, int folds, uint64_t seed,
                        Exec exec) {
  if (folds < 2) {
    throw Error("grid_search_cv: need at least 2 folds");
  }
  const std::vector<GBDTParams> candidates = grid.expand(seed);

  // Stratified fold assignment: shuffle each label class with its own
  // seeded stream, then deal round-robin.
  std::vector<size_t> pos_idx, neg_idx;
  for (size_t i = 0; i < data.size(); ++i) {
    if (!data[i].label) {
      throw Error("grid_search_cv: unlabeled example \"" + data[i].doc_id +
                  "\"");
    }
    (*data[i].label == 1 ? pos_idx : neg_idx).push_back(i);
  }
  if (pos_idx.size() < static_cast<size_t>(folds) ||
      neg_idx.size() < static_cast<size_t>(folds)) {
    throw Error("grid_search_cv: need at least " + std::to_string(folds) +
                " examples per class");
  }
  std::vector<int> fold_of(data.size());
  for (int label = 0; label < 2; ++label) {
    std::vector<size_t>& idx = label == 1 ? pos_idx : neg_idx;
    SplitMix64 rng(mix_seed(seed, static_cast<uint64_t>(label)));
    for (size_t i = idx.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(rng.next_below(i + 1));
      std::swap(idx[i], idx[j]);
    }
    for (size_t i = 0; i < idx.size(); ++i) {
      fold_of[idx[i]] = static_cast<int>(i % static_cast<size_t>(folds));
    }
  }

  // One slot per (candidate, fold); the flat loop parallelizes across
  // slots while each inner fit runs serially, so the numbers cannot
  // depend on the thread count.
  const size_t n_cells = candidates.size() * static_cast<size_t>(folds);
  std::vector<double> cell_auc(n_cells, 0.0);
  std::string first_error;
  int64_t first_error_idx = static_cast<int64_t>(n_cells);
  const bool par = exec == Exec::Parallel;
#pragma omp parallel for schedule(dynamic) if (par)
  for (int64_t cell = 0; cell < static_cast<int64_t>(n_cells); ++cell) {
    try {
      const size_t c = static_cast<size_t>(cell) / static_cast<size_t>(folds);
      const int fold = static_cast<int>(static_cast<size_t>(cell) %
                                        static_cast<size_t>(folds));
      std::vector<AttackFeatures> train, val;
      for (size_t i = 0; i < data.size(); ++i) {
        (fold_of[i] == fold ? val : train).push_back(data[i]);
      }
      const GBDTModel model = GBDTModel::fit(train, candidates[c],
                                             Exec::Serial);
      std::vector<ScoredExample> scored;
      scored.reserve(val.size());
      for (const AttackFeatures& f : val) {
        scored.push_back({f.doc_id, model.predict_proba(f), *f.label});
      }
      cell_auc[static_cast<size_t>(cell)] = auc_roc(scored);
    } catch (const std::exception& e) {
#pragma omp critical(mia_cv_error)
      if (cell < first_error_idx) {
        first_error_idx = cell;
        first_error = e.what();
      }
    }
  }
  if (first_error_idx < static_cast<int64_t>(n_cells)) {
    throw Error(first_error);
  }

  CvResult result;
  result.table.reserve(candidates.size());
  for (size_t c = 0; c < candidates.size(); ++c) {
    CvRow row;
    row.params = candidates[c];
    double sum = 0.0;
    for (int fold = 0; fold < folds; ++fold) {
      const double auc = cell_auc[c * static_cast<size_t>(folds) +
                                  static_cast<size_t>(fold)];
      row.fold_auc.push_back(auc);
      sum += auc;
    }
    row.mean_auc = sum / static_cast<double>(folds);
    result.table.push_back(std::move(row));
  }

  size_t best = 0;
  for (size_t c = 1; c < result.table.size(); ++c) {
    const CvRow& a = result.table[c];
    const CvRow& b = result.table[best];
    const bool wins =
        a.mean_auc > b.mean_auc ||
        (a.mean_auc == b.mean_auc &&
         (a.params.n_trees < b.params.n_trees ||
          (a.params.n_trees == b.params.n_trees &&
           a.params.max_depth < b.params.max_depth)));
    if (wins) best = c;
  }
  result.best = result.table[best].params;
  return result;
}

}  // namespace mia

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mia/exec.hpp"
#include "mia/features.hpp"

namespace mia {

struct GBDTParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;    // eta in (0,1]
  double lambda = 1.0;           // L2 leaf penalty >= 0
  double gamma = 0.0;            // split gain threshold >= 0
  double min_child_weight = 1.0; // minimum hessian sum per child >= 0
  uint64_t seed = 0;

  void validate() const;
  std::string describe() const;
};

// Flat binary tree. nodes[0] is the root; internal nodes route
// x[feature] < threshold to left, otherwise right. Leaves carry the raw
// Newton weight; shrinkage is applied at prediction time.
struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const AttackFeatures& x) const;
};

// Diagnostics recorded during fit, for tests and the optimization
// property checks. Not part of the serialized model.
struct FitTrace {
  std::vector<double> round_loss;  // mean logistic loss after each round
  struct SplitRecord {
    double gain;
    double h_left;
    double h_right;
  };
  std::vector<SplitRecord> splits;  // every accepted split
  struct LeafRecord {
    double g;
    double h;
    double weight;
  };
  std::vector<LeafRecord> leaves;
};

// Gradient-boosted trees with logistic loss and second-order leaf weights:
// per round g_i = p_i - y_i, h_i = p_i (1 - p_i); exact greedy splits over
// all four features with candidate thresholds at midpoints between
// consecutive distinct sorted values; split gain
//   1/2 [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - (G_L+G_R)^2/(H+lambda) ] - gamma
// and leaf weight -G/(H+lambda). The best split is chosen under the total
// order (gain desc, feature asc, threshold asc), so the parallel
// per-feature search reduces to the same answer in any execution order.
class GBDTModel {
 public:
  static GBDTModel fit(const std::vector<AttackFeatures>& data,
                       const GBDTParams& params, Exec exec = Exec::Parallel,
                       FitTrace* trace = nullptr);

  double predict_margin(const AttackFeatures& x) const;
  double predict_proba(const AttackFeatures& x) const;
  std::vector<double> predict_proba_batch(
      const std::vector<AttackFeatures>& xs, Exec exec = Exec::Parallel) const;

  const GBDTParams& params() const { return params_; }
  double base_margin() const { return base_margin_; }
  const std::vector<Tree>& trees() const { return trees_; }

  static constexpr uint32_t kFormatVersion = 1;
  std::string to_json() const;
  static GBDTModel from_json(const std::string& json_text);

 private:
  GBDTParams params_;
  double base_margin_ = 0.0;
  std::vector<Tree> trees_;
};

struct ParamGrid {
  std::vector<int> n_trees = {50, 100, 200};
  std::vector<int> max_depth = {2, 3, 4};
  std::vector<double> learning_rate = {0.1, 0.3};
  std::vector<double> lambda = {1.0};
  std::vector<double> gamma = {0.0};
  std::vector<double> min_child_weight = {1.0};

  // Expansion order (outer to inner): n_trees, max_depth, learning_rate,
  // lambda, gamma, min_child_weight. Grid-order tie breaking refers to
  // this order.
  std::vector<GBDTParams> expand(uint64_t seed) const;
};

struct CvRow {
  GBDTParams params;
  std::vector<double> fold_auc;
  double mean_auc = 0.0;
};

struct CvResult {
  GBDTParams best;
  std::vector<CvRow> table;
};

// Grid search with stratified k-fold cross-validation keyed by seed.
// Selection metric is mean validation AUC; ties break toward fewer trees,
// then shallower depth, then grid order.
CvResult grid_search_cv(const std::vector<AttackFeatures>& data,
                        const ParamGrid& grid, int folds, uint64_t seed,
                        Exec exec = Exec::Parallel);

}  // namespace mia

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/exec.hpp"
#include "mia/scores.hpp"

namespace mia {

inline constexpr double kDefaultMinkPercent = 20.0;

// The ensemble feature vector, in fixed order [loss, ref, mink, zlib].
//   f_loss: mean per-token negative log-likelihood (nats/token), >= 0
//   f_ref:  loss difference target - reference (nats/token)
//   f_mink: mean log-probability of the lowest-k% tokens (nats/token), <= 0
//   f_zlib: total NLL divided by compressed byte count (nats/byte), >= 0
struct AttackFeatures {
  std::string doc_id;
  double f_loss = 0.0;
  double f_ref = 0.0;
  double f_mink = 0.0;
  double f_zlib = 0.0;
  std::optional<int> label;

  double operator[](size_t i) const {
    switch (i) {
      case 0: return f_loss;
      case 1: return f_ref;
      case 2: return f_mink;
      default: return f_zlib;
    }
  }
};

inline constexpr size_t kNumFeatures = 4;
inline constexpr const char* kFeatureNames[kNumFeatures] = {"f_loss", "f_ref",
                                                            "f_mink",
                                                            "f_zlib"};

// Mean per-token NLL: -(1/T) * sum(logprobs). Mean rather than sum so the
// value is comparable across document lengths.
double loss_feature(const TokenScores& scores);

// loss(target) - loss(reference). Negative means the target fits the
// document better than the reference. Token-count mismatch is allowed
// (both sides are length-normalized); doc_id mismatch is an error.
double ref_feature(const TokenScores& target, const TokenScores& reference);

// Mean logprob of the m = max(1, floor(T*k/100)) lowest-logprob tokens,
// ties broken by earlier index. k must lie in (0, 100].
double mink_feature(const TokenScores& scores, double k_percent);

// Total NLL in nats divided by the deflate size of the text, nats/byte.
double zlib_feature(const TokenScores& scores, const std::string& text);

AttackFeatures build_features(const Document& doc,
                              const TokenScores& target_scores,
                              const TokenScores& reference_scores,
                              double k_percent = kDefaultMinkPercent);

// One document per slot; parallel across documents. docs[i] must match
// target[i] and reference[i] by doc_id.
std::vector<AttackFeatures> featurize_corpus(
    const std::vector<Document>& docs, const std::vector<TokenScores>& target,
    const std::vector<TokenScores>& reference,
    double k_percent = kDefaultMinkPercent, Exec exec = Exec::Parallel);

// Interchange CSV: header doc_id,f_loss,f_ref,f_mink,f_zlib,label.
// Doubles round-trip exactly; missing labels serialize as an empty field.
void save_features_csv(const std::string& path,
                       const std::vector<AttackFeatures>& rows);
std::vector<AttackFeatures> load_features_csv(const std::string& path);

}  // namespace mia

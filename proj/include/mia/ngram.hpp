#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/exec.hpp"
#include "mia/scores.hpp"

namespace mia {

// Fixed-order add-alpha character n-gram model. No backoff, no
// interpolation: P(t|c) = (count(c,t) + alpha) / (total(c) + alpha * V)
// with V = |vocab| + 1 for the shared UNK token. Tokens absent from the
// training vocabulary map to UNK at scoring time. Contexts are the n-1
// preceding tokens, padded at the start of a document with BOS sentinels;
// BOS is never predicted and never counted in the vocabulary.
//
// Models are immutable after training and safe to share across threads.
class NGramModel {
 public:
  static constexpr uint32_t kBos = 0xfffffffeu;
  static constexpr uint32_t kUnk = 0xffffffffu;

  struct ContextCounts {
    std::map<uint32_t, uint64_t> counts;
    uint64_t total = 0;
  };

  static NGramModel train(const std::vector<Document>& docs, int order,
                          double alpha, const std::string& model_id = "");

  // Model with the given vocabulary and no counts: every prediction is
  // uniform over vocab + UNK.
  static NGramModel with_vocab(int order, double alpha,
                               const std::vector<uint32_t>& vocab,
                               const std::string& model_id = "");

  TokenScores score(const TokenSeq& seq, const std::string& doc_id) const;

  double log_prob(const std::vector<uint32_t>& context, uint32_t token) const;

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  const std::string& model_id() const { return model_id_; }
  size_t vocab_size() const { return vocab_sorted_.size(); }
  const std::vector<uint32_t>& vocab() const { return vocab_sorted_; }
  const std::map<std::vector<uint32_t>, ContextCounts>& contexts() const {
    return contexts_;
  }

  // Versioned little-endian binary container; see save() in ngram.cpp for
  // the exact layout. load rejects truncation, bad magic and versions
  // newer than kFormatVersion.
  static constexpr uint32_t kFormatVersion = 1;
  std::vector<uint8_t> save() const;
  static NGramModel load(const std::vector<uint8_t>& bytes);
  void save_file(const std::string& path) const;
  static NGramModel load_file(const std::string& path);

 private:
  NGramModel() = default;

  int order_ = 0;
  double alpha_ = 0.0;
  std::string model_id_;
  std::vector<uint32_t> vocab_sorted_;
  std::unordered_set<uint32_t> vocab_set_;
  std::map<std::vector<uint32_t>, ContextCounts> contexts_;
};

// Scores one document per slot; parallel across documents.
std::vector<TokenScores> score_corpus(const NGramModel& model,
                                      const std::vector<Document>& docs,
                                      Exec exec = Exec::Parallel);

}  // namespace mia

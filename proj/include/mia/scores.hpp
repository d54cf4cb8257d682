#pragma once

#include <string>
#include <vector>

namespace mia {

// Per-token natural-log probabilities for one document under one model.
// Every entry is finite and <= 0.
struct TokenScores {
  std::string doc_id;
  std::string model_id;
  std::vector<double> logprobs;
};

// Externally computed scores, one model per file. The attack pipeline is
// agnostic to where the log-probabilities came from as long as they are in
// nats; the token granularity of the file is trusted as-is.
struct ScoreFile {
  std::string model_id;
  std::vector<TokenScores> records;

  const TokenScores* find(const std::string& doc_id) const;
};

// JSONL, first line {"model_id":string,"units":"nats"}, then one
// {"doc_id":string,"logprobs":[numbers]} per line. Rejects positive,
// NaN or infinite logprobs (citing doc_id and index), duplicate doc_ids,
// and any units other than "nats".
ScoreFile load_scores(const std::string& path);

void save_scores(const std::string& path, const ScoreFile& scores);

}  // namespace mia

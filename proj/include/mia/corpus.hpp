#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mia {

// One text record. label is unset until a split plan assigns membership.
struct Document {
  std::string id;
  std::string text;
  std::optional<int> label;  // 1 = member, 0 = non-member
};

// Token sequence under the default tokenizer: one token per unicode scalar
// value. Detokenization reproduces the original text exactly.
struct TokenSeq {
  std::vector<uint32_t> tokens;

  size_t length() const { return tokens.size(); }
};

// Loads a UTF-8 JSONL corpus: one object per line with required string
// keys "id" and "text"; unknown keys are ignored. Blank lines are skipped.
// Errors name the 1-based line number or the offending id.
std::vector<Document> load_corpus(const std::string& path,
                                  bool allow_empty = false);

// Writes documents back out in the same JSONL format.
void save_corpus(const std::string& path, const std::vector<Document>& docs);

// Character tokenizer. Empty text is an error: a zero-length sequence has
// no per-token loss.
TokenSeq tokenize(const Document& doc);
TokenSeq tokenize_text(const std::string& text);

std::string detokenize(const TokenSeq& seq);

}  // namespace mia

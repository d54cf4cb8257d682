#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mia/corpus.hpp"

namespace mia {

struct SynthParams {
  uint64_t seed = 1;
  size_t n_docs = 2000;
  size_t doc_length = 400;
  size_t alphabet_size = 27;  // 'a'..'z' plus space
  double redundancy = 0.5;    // fraction of each document made of its own
                              // repeated signature substring
};

// Seeded Markov character source with a per-document idiosyncratic
// signature substring, so a model trained on a subset of the documents
// memorizes those documents' signatures. Deterministic byte-for-byte for
// fixed parameters.
std::vector<Document> make_synthetic_corpus(const SynthParams& params);

void write_synthetic_corpus(const std::string& path,
                            const SynthParams& params);

}  // namespace mia

#include "mia/synth.hpp"

#include <array>
#include <cstdio>

#include "mia/error.hpp"
#include "mia/prng.hpp"

namespace mia {

namespace {

constexpr char kAlphabetTable[] =
    "abcdefghijklmnopqrstuvwxyz 0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ.,;:!?-'";

constexpr size_t kSignatureLength = 16;
constexpr size_t kMarkovRunLength = 16;

}  // namespace

std::vector<Document> make_synthetic_corpus(const SynthParams& params) {
  if (params.n_docs == 0 || params.doc_length == 0) {
    throw Error("synthetic corpus: n_docs and doc_length must be positive");
  }
  if (params.alphabet_size < 2) {
    throw Error("synthetic corpus: alphabet_size must be >= 2");
  }
  if (params.alphabet_size > sizeof(kAlphabetTable) - 1) {
    throw Error("synthetic corpus: alphabet_size must be <= " +
                std::to_string(sizeof(kAlphabetTable) - 1));
  }
  if (!(params.redundancy > 0.0 && params.redundancy < 1.0)) {
    throw Error("synthetic corpus: redundancy must lie in (0,1)");
  }

  const size_t a = params.alphabet_size;

  // Integer transition weights keep the source exactly reproducible.
  SplitMix64 source_rng(mix_seed(params.seed, 0));
  std::vector<uint64_t> weights(a * a);
  std::vector<uint64_t> row_total(a, 0);
  for (size_t t = 0; t < a; ++t) {
    for (size_t u = 0; u < a; ++u) {
      weights[t * a + u] = 1 + source_rng.next_below(16);
      row_total[t] += weights[t * a + u];
    }
  }
  auto next_char = [&](SplitMix64& rng, size_t prev) -> size_t {
    uint64_t r = rng.next_below(row_total[prev]);
    size_t u = 0;
    while (r >= weights[prev * a + u]) {
      r -= weights[prev * a + u];
      ++u;
    }
    return u;
  };

  std::vector<Document> docs;
  docs.reserve(params.n_docs);
  for (size_t d = 0; d < params.n_docs; ++d) {
    SplitMix64 rng(mix_seed(params.seed, 1000003 + d));
    std::string signature;
    for (size_t i = 0; i < kSignatureLength; ++i) {
      signature.push_back(kAlphabetTable[rng.next_below(a)]);
    }
    std::string text;
    text.reserve(params.doc_length + kSignatureLength + kMarkovRunLength);
    size_t prev = rng.next_below(a);
    text.push_back(kAlphabetTable[prev]);
    while (text.size() < params.doc_length) {
      if (rng.next_unit() < params.redundancy) {
        text += signature;
        prev = static_cast<size_t>(
            std::string_view(kAlphabetTable).find(signature.back()));
      } else {
        for (size_t i = 0; i < kMarkovRunLength; ++i) {
          prev = next_char(rng, prev);
          text.push_back(kAlphabetTable[prev]);
        }
      }
    }
    text.resize(params.doc_length);

    char id[16];
    std::snprintf(id, sizeof(id), "d%06zu", d);
    docs.push_back({id, std::move(text), std::nullopt});
  }
  return docs;
}

void write_synthetic_corpus(const std::string& path,
                            const SynthParams& params) {
  save_corpus(path, make_synthetic_corpus(params));
}

}  // namespace mia

#include "mia/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mia/error.hpp"

namespace mia {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'A', 'N', 'G', 'R', 'A', 'M'};

// Little-endian primitive writers/readers for the model container.
template <typename T>
void put(std::vector<uint8_t>& out, T v) {
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > size_) {
      throw Error("ngram model: truncated at byte " + std::to_string(pos_));
    }
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(size_t len) {
    if (pos_ + len > size_) {
      throw Error("ngram model: truncated at byte " + std::to_string(pos_));
    }
    std::string s(reinterpret_cast<const char*>(data_ + pos_), len);
    pos_ += len;
    return s;
  }

  bool done() const { return pos_ == size_; }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace

NGramModel NGramModel::train(const std::vector<Document>& docs, int order,
                             double alpha, const std::string& model_id) {
  if (docs.empty()) {
    throw Error("ngram train: empty document list");
  }
  if (order < 1) {
    throw Error("ngram train: order must be >= 1");
  }
  if (!(alpha > 0.0)) {
    throw Error("ngram train: alpha must be > 0");
  }
  NGramModel m;
  m.order_ = order;
  m.alpha_ = alpha;
  m.model_id_ = model_id.empty() ? ("ngram-o" + std::to_string(order))
                                 : model_id;

  std::vector<uint32_t> window;
  for (const Document& doc : docs) {
    const TokenSeq seq = tokenize(doc);
    window.assign(static_cast<size_t>(order - 1), kBos);
    for (uint32_t tok : seq.tokens) {
      m.vocab_set_.insert(tok);
      ContextCounts& cc = m.contexts_[window];
      ++cc.counts[tok];
      ++cc.total;
      if (order > 1) {
        window.erase(window.begin());
        window.push_back(tok);
      }
    }
  }
  m.vocab_sorted_.assign(m.vocab_set_.begin(), m.vocab_set_.end());
  std::sort(m.vocab_sorted_.begin(), m.vocab_sorted_.end());
  return m;
}

NGramModel NGramModel::with_vocab(int order, double alpha,
                                  const std::vector<uint32_t>& vocab,
                                  const std::string& model_id) {
  if (order < 1 || !(alpha > 0.0)) {
    throw Error("ngram with_vocab: invalid order or alpha");
  }
  NGramModel m;
  m.order_ = order;
  m.alpha_ = alpha;
  m.model_id_ = model_id.empty() ? "uniform" : model_id;
  m.vocab_sorted_ = vocab;
  std::sort(m.vocab_sorted_.begin(), m.vocab_sorted_.end());
  m.vocab_sorted_.erase(
      std::unique(m.vocab_sorted_.begin(), m.vocab_sorted_.end()),
      m.vocab_sorted_.end());
  m.vocab_set_.insert(m.vocab_sorted_.begin(), m.vocab_sorted_.end());
  return m;
}

double NGramModel::log_prob(const std::vector<uint32_t>& context,
                            uint32_t token) const {
  const double v = static_cast<double>(vocab_sorted_.size()) + 1.0;
  const uint32_t t = vocab_set_.count(token) ? token : kUnk;
  uint64_t count = 0;
  uint64_t total = 0;
  auto it = contexts_.find(context);
  if (it != contexts_.end()) {
    total = it->second.total;
    auto ct = it->second.counts.find(t);
    if (ct != it->second.counts.end()) count = ct->second;
  }
  return std::log((static_cast<double>(count) + alpha_) /
                  (static_cast<double>(total) + alpha_ * v));
}

TokenScores NGramModel::score(const TokenSeq& seq,
                              const std::string& doc_id) const {
  if (seq.tokens.empty()) {
    throw Error("ngram score: empty token sequence for doc \"" + doc_id +
                "\"");
  }
  TokenScores out;
  out.doc_id = doc_id;
  out.model_id = model_id_;
  out.logprobs.reserve(seq.tokens.size());
  std::vector<uint32_t> window(static_cast<size_t>(order_ - 1), kBos);
  for (uint32_t raw : seq.tokens) {
    out.logprobs.push_back(log_prob(window, raw));
    if (order_ > 1) {
      window.erase(window.begin());
      window.push_back(vocab_set_.count(raw) ? raw : kUnk);
    }
  }
  return out;
}

std::vector<uint8_t> NGramModel::save() const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  put<uint32_t>(out, kFormatVersion);
  put<uint32_t>(out, static_cast<uint32_t>(order_));
  put<double>(out, alpha_);
  put<uint32_t>(out, static_cast<uint32_t>(model_id_.size()));
  out.insert(out.end(), model_id_.begin(), model_id_.end());
  put<uint64_t>(out, vocab_sorted_.size());
  for (uint32_t t : vocab_sorted_) put<uint32_t>(out, t);
  put<uint64_t>(out, contexts_.size());
  for (const auto& [ctx, cc] : contexts_) {
    put<uint32_t>(out, static_cast<uint32_t>(ctx.size()));
    for (uint32_t t : ctx) put<uint32_t>(out, t);
    put<uint64_t>(out, cc.counts.size());
    for (const auto& [tok, cnt] : cc.counts) {
      put<uint32_t>(out, tok);
      put<uint64_t>(out, cnt);
    }
  }
  return out;
}

NGramModel NGramModel::load(const std::vector<uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size());
  const std::string magic = r.get_string(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error("ngram model: bad magic, not a model file");
  }
  const uint32_t version = r.get<uint32_t>();
  if (version > kFormatVersion) {
    throw Error("ngram model: file format version " + std::to_string(version) +
                " is newer than supported version " +
                std::to_string(kFormatVersion));
  }
  NGramModel m;
  m.order_ = static_cast<int>(r.get<uint32_t>());
  m.alpha_ = r.get<double>();
  if (m.order_ < 1 || !(m.alpha_ > 0.0)) {
    throw Error("ngram model: corrupt header (order or alpha out of range)");
  }
  m.model_id_ = r.get_string(r.get<uint32_t>());
  const uint64_t vocab_n = r.get<uint64_t>();
  m.vocab_sorted_.reserve(vocab_n);
  for (uint64_t i = 0; i < vocab_n; ++i) {
    m.vocab_sorted_.push_back(r.get<uint32_t>());
  }
  m.vocab_set_.insert(m.vocab_sorted_.begin(), m.vocab_sorted_.end());
  const uint64_t n_ctx = r.get<uint64_t>();
  for (uint64_t i = 0; i < n_ctx; ++i) {
    const uint32_t ctx_len = r.get<uint32_t>();
    std::vector<uint32_t> ctx;
    ctx.reserve(ctx_len);
    for (uint32_t k = 0; k < ctx_len; ++k) ctx.push_back(r.get<uint32_t>());
    ContextCounts cc;
    const uint64_t n_entries = r.get<uint64_t>();
    for (uint64_t k = 0; k < n_entries; ++k) {
      const uint32_t tok = r.get<uint32_t>();
      const uint64_t cnt = r.get<uint64_t>();
      cc.counts.emplace(tok, cnt);
      cc.total += cnt;
    }
    m.contexts_.emplace(std::move(ctx), std::move(cc));
  }
  if (!r.done()) {
    throw Error("ngram model: trailing bytes after context table");
  }
  return m;
}

void NGramModel::save_file(const std::string& path) const {
  const std::vector<uint8_t> bytes = save();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open model file for writing: " + path);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("write failed: " + path);
  }
}

NGramModel NGramModel::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open model file: " + path);
  }
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return load(bytes);
}

std::vector<TokenScores> score_corpus(const NGramModel& model,
                                      const std::vector<Document>& docs,
                                      Exec exec) {
  std::vector<TokenScores> out(docs.size());
  const bool par = exec == Exec::Parallel;
  const int64_t n = static_cast<int64_t>(docs.size());
  // Exceptions must not escape the parallel region; remember the failure
  // with the lowest document index so the message is thread-count
  // independent.
  std::string first_error;
  int64_t first_error_idx = n;
#pragma omp parallel for schedule(dynamic) if (par)
  for (int64_t i = 0; i < n; ++i) {
    try {
      out[static_cast<size_t>(i)] =
          model.score(tokenize(docs[static_cast<size_t>(i)]),
                      docs[static_cast<size_t>(i)].id);
    } catch (const std::exception& e) {
#pragma omp critical(mia_score_corpus_error)
      if (i < first_error_idx) {
        first_error_idx = i;
        first_error = e.what();
      }
    }
  }
  if (first_error_idx < n) {
    throw Error(first_error);
  }
  return out;
}

}  // namespace mia

#include "mia/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mia/compress.hpp"
#include "mia/error.hpp"

namespace mia {

namespace {

void require_nonempty(const TokenScores& scores, const char* op) {
  if (scores.logprobs.empty()) {
    throw Error(std::string(op) + ": empty score list for doc \"" +
                scores.doc_id + "\"");
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

double loss_feature(const TokenScores& scores) {
  require_nonempty(scores, "loss_feature");
  double sum = 0.0;
  for (double lp : scores.logprobs) sum += lp;
  return -sum / static_cast<double>(scores.logprobs.size());
}

double ref_feature(const TokenScores& target, const TokenScores& reference) {
  if (target.doc_id != reference.doc_id) {
    throw Error("ref_feature: doc_id mismatch (\"" + target.doc_id +
                "\" vs \"" + reference.doc_id + "\")");
  }
  return loss_feature(target) - loss_feature(reference);
}

double mink_feature(const TokenScores& scores, double k_percent) {
  require_nonempty(scores, "mink_feature");
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    throw Error("mink_feature: k must lie in (0,100], got " +
                std::to_string(k_percent));
  }
  const size_t t = scores.logprobs.size();
  const size_t m = std::max<size_t>(
      1, static_cast<size_t>(
             std::floor(static_cast<double>(t) * k_percent / 100.0)));
  // Lowest logprob first; ties broken by earlier index.
  std::vector<size_t> idx(t);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<ptrdiff_t>(m),
                    idx.end(), [&](size_t a, size_t b) {
                      if (scores.logprobs[a] != scores.logprobs[b]) {
                        return scores.logprobs[a] < scores.logprobs[b];
                      }
                      return a < b;
                    });
  double sum = 0.0;
  for (size_t i = 0; i < m; ++i) sum += scores.logprobs[idx[i]];
  return sum / static_cast<double>(m);
}

double zlib_feature(const TokenScores& scores, const std::string& text) {
  require_nonempty(scores, "zlib_feature");
  if (text.empty()) {
    throw Error("zlib_feature: empty text for doc \"" + scores.doc_id + "\"");
  }
  double total_nll = 0.0;
  for (double lp : scores.logprobs) total_nll -= lp;
  return total_nll / static_cast<double>(deflate_size(text));
}

AttackFeatures build_features(const Document& doc,
                              const TokenScores& target_scores,
                              const TokenScores& reference_scores,
                              double k_percent) {
  if (target_scores.doc_id != doc.id || reference_scores.doc_id != doc.id) {
    throw Error("build_features: doc_id mismatch for \"" + doc.id + "\"");
  }
  AttackFeatures f;
  f.doc_id = doc.id;
  f.f_loss = loss_feature(target_scores);
  f.f_ref = ref_feature(target_scores, reference_scores);
  f.f_mink = mink_feature(target_scores, k_percent);
  f.f_zlib = zlib_feature(target_scores, doc.text);
  f.label = doc.label;
  return f;
}

std::vector<AttackFeatures> featurize_corpus(
    const std::vector<Document>& docs, const std::vector<TokenScores>& target,
    const std::vector<TokenScores>& reference, double k_percent, Exec exec) {
  if (docs.size() != target.size() || docs.size() != reference.size()) {
    throw Error("featurize_corpus: docs, target and reference sizes differ");
  }
  std::vector<AttackFeatures> out(docs.size());
  const bool par = exec == Exec::Parallel;
  const int64_t n = static_cast<int64_t>(docs.size());
  std::string first_error;
  int64_t first_error_idx = n;
#pragma omp parallel for schedule(dynamic) if (par)
  for (int64_t i = 0; i < n; ++i) {
    try {
      const size_t k = static_cast<size_t>(i);
      out[k] = build_features(docs[k], target[k], reference[k], k_percent);
    } catch (const std::exception& e) {
#pragma omp critical(mia_featurize_error)
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

void save_features_csv(const std::string& path,
                       const std::vector<AttackFeatures>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open features CSV for writing: " + path);
  }
  out << "doc_id,f_loss,f_ref,f_mink,f_zlib,label\n";
  for (const AttackFeatures& f : rows) {
    out << f.doc_id << ',' << format_double(f.f_loss) << ','
        << format_double(f.f_ref) << ',' << format_double(f.f_mink) << ','
        << format_double(f.f_zlib) << ','
        << (f.label ? std::to_string(*f.label) : std::string()) << "\n";
  }
  if (!out) {
    throw Error("write failed: " + path);
  }
}

std::vector<AttackFeatures> load_features_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open features CSV: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(path + ": missing CSV header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "doc_id,f_loss,f_ref,f_mink,f_zlib,label") {
    throw Error(path + ": unexpected CSV header: " + line);
  }
  std::vector<AttackFeatures> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 6) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected 6 fields");
    }
    AttackFeatures f;
    f.doc_id = fields[0];
    double* slots[4] = {&f.f_loss, &f.f_ref, &f.f_mink, &f.f_zlib};
    for (size_t k = 0; k < 4; ++k) {
      const std::string& s = fields[k + 1];
      const auto [ptr, ec] =
          std::from_chars(s.data(), s.data() + s.size(), *slots[k]);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(path + ":" + std::to_string(line_no) +
                    ": bad number \"" + s + "\"");
      }
    }
    if (!fields[5].empty()) {
      if (fields[5] != "0" && fields[5] != "1") {
        throw Error(path + ":" + std::to_string(line_no) +
                    ": label must be 0, 1 or empty");
      }
      f.label = fields[5] == "1" ? 1 : 0;
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace mia

#include "mia/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

std::vector<Document> load_corpus(const std::string& path, bool allow_empty) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open corpus file: " + path);
  }
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": malformed JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains("text") || !obj["text"].is_string()) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": expected object with string keys \"id\" and \"text\"");
    }
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    if (doc.id.empty()) {
      throw Error(path + ":" + std::to_string(line_no) + ": empty id");
    }
    if (!seen.insert(doc.id).second) {
      throw Error(path + ":" + std::to_string(line_no) + ": duplicate id \"" +
                  doc.id + "\"");
    }
    if (doc.text.empty() && !allow_empty) {
      throw Error(path + ":" + std::to_string(line_no) + ": document \"" +
                  doc.id + "\" has empty text (pass allow_empty to accept)");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open corpus file for writing: " + path);
  }
  for (const Document& doc : docs) {
    json obj;
    obj["id"] = doc.id;
    obj["text"] = doc.text;
    out << obj.dump() << "\n";
  }
  if (!out) {
    throw Error("write failed: " + path);
  }
}

TokenSeq tokenize_text(const std::string& text) {
  if (text.empty()) {
    throw Error("cannot tokenize empty text");
  }
  return TokenSeq{decode_utf8(text)};
}

TokenSeq tokenize(const Document& doc) {
  if (doc.text.empty()) {
    throw Error("cannot tokenize document \"" + doc.id + "\": empty text");
  }
  return tokenize_text(doc.text);
}

std::string detokenize(const TokenSeq& seq) { return encode_utf8(seq.tokens); }

}  // namespace mia

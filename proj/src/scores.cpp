#include "mia/scores.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"

namespace mia {

using nlohmann::json;

const TokenScores* ScoreFile::find(const std::string& doc_id) const {
  for (const TokenScores& rec : records) {
    if (rec.doc_id == doc_id) return &rec;
  }
  return nullptr;
}

ScoreFile load_scores(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open score file: " + path);
  }
  std::string line;
  size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line()) {
    throw Error(path + ": missing header line");
  }
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(path + ":" + std::to_string(line_no) +
                ": malformed header: " + e.what());
  }
  if (!header.is_object() || !header.contains("model_id") ||
      !header["model_id"].is_string() || !header.contains("units")) {
    throw Error(path + ": header must be {\"model_id\":string,\"units\":\"nats\"}");
  }
  if (header["units"] != "nats") {
    throw Error(path + ": units must be \"nats\", got " +
                header["units"].dump());
  }

  ScoreFile out;
  out.model_id = header["model_id"].get<std::string>();
  std::unordered_set<std::string> seen;
  while (next_line()) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": malformed JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("doc_id") ||
        !obj["doc_id"].is_string() || !obj.contains("logprobs") ||
        !obj["logprobs"].is_array()) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": expected {\"doc_id\":string,\"logprobs\":[numbers]}");
    }
    TokenScores rec;
    rec.doc_id = obj["doc_id"].get<std::string>();
    rec.model_id = out.model_id;
    if (!seen.insert(rec.doc_id).second) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": duplicate doc_id \"" + rec.doc_id + "\"");
    }
    const auto& arr = obj["logprobs"];
    rec.logprobs.reserve(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) {
        throw Error(path + ": doc \"" + rec.doc_id + "\" logprob[" +
                    std::to_string(i) + "] is not a number");
      }
      const double v = arr[i].get<double>();
      if (std::isnan(v) || std::isinf(v)) {
        throw Error(path + ": doc \"" + rec.doc_id + "\" logprob[" +
                    std::to_string(i) + "] is not finite");
      }
      if (v > 0.0) {
        throw Error(path + ": doc \"" + rec.doc_id + "\" logprob[" +
                    std::to_string(i) + "] = " + std::to_string(v) +
                    " > 0 (probability above 1)");
      }
      rec.logprobs.push_back(v);
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

void save_scores(const std::string& path, const ScoreFile& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open score file for writing: " + path);
  }
  json header;
  header["model_id"] = scores.model_id;
  header["units"] = "nats";
  out << header.dump() << "\n";
  for (const TokenScores& rec : scores.records) {
    json obj;
    obj["doc_id"] = rec.doc_id;
    obj["logprobs"] = rec.logprobs;
    out << obj.dump() << "\n";
  }
  if (!out) {
    throw Error("write failed: " + path);
  }
}

}  // namespace mia

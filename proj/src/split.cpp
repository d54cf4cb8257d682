#include "mia/split.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mia/error.hpp"
#include "mia/prng.hpp"

namespace mia {

using nlohmann::json;

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::MemberTrain:
      return "member_train";
    case Partition::ReferenceTrain:
      return "reference_train";
    case Partition::AttackTrain:
      return "attack_train";
    case Partition::AttackTest:
      return "attack_test";
  }
  return "?";
}

Partition partition_from_name(const std::string& name) {
  if (name == "member_train") return Partition::MemberTrain;
  if (name == "reference_train") return Partition::ReferenceTrain;
  if (name == "attack_train") return Partition::AttackTrain;
  if (name == "attack_test") return Partition::AttackTest;
  throw Error("unknown partition name: \"" + name + "\"");
}

SplitPlan make_splits(const std::vector<Document>& corpus, uint64_t seed,
                      const std::array<double, 4>& fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) {
      throw Error("split fractions must each lie in (0,1)");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error("split fractions must sum to 1 (got " + std::to_string(sum) +
                ")");
  }
  if (corpus.empty()) {
    throw Error("cannot split an empty corpus");
  }

  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const Document& doc : corpus) ids.push_back(doc.id);
  std::sort(ids.begin(), ids.end());

  // Fisher-Yates keyed by SplitMix64(seed).
  SplitMix64 rng(seed);
  for (size_t i = ids.size() - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.next_below(i + 1));
    std::swap(ids[i], ids[j]);
  }

  const size_t n = ids.size();
  std::array<size_t, 4> bounds{};
  double cum = 0.0;
  for (size_t k = 0; k < 4; ++k) {
    cum += fractions[k];
    bounds[k] = (k == 3) ? n
                         : static_cast<size_t>(std::floor(
                               static_cast<double>(n) * cum + 1e-9));
  }

  SplitPlan plan;
  plan.seed = seed;
  plan.fractions = fractions;
  size_t lo = 0;
  for (size_t k = 0; k < 4; ++k) {
    if (bounds[k] <= lo) {
      throw Error(std::string("partition \"") +
                  partition_name(static_cast<Partition>(k)) +
                  "\" is empty: corpus of " + std::to_string(n) +
                  " documents is too small for the given fractions");
    }
    for (size_t i = lo; i < bounds[k]; ++i) {
      plan.partitions[k].push_back(ids[i]);
      plan.assignment.emplace(ids[i], static_cast<Partition>(k));
    }
    lo = bounds[k];
  }

  const auto& members = plan.ids_of(Partition::MemberTrain);
  const auto& train_pool = plan.ids_of(Partition::AttackTrain);
  const auto& test_pool = plan.ids_of(Partition::AttackTest);
  if (members.size() < train_pool.size() + test_pool.size()) {
    throw Error(
        "member_train (" + std::to_string(members.size()) +
        " documents) cannot balance the attack partitions (" +
        std::to_string(train_pool.size()) + " + " +
        std::to_string(test_pool.size()) +
        " non-members); increase the member_train fraction");
  }

  // Members in shuffle order, split disjointly across the two attack sets.
  for (size_t i = 0; i < train_pool.size(); ++i) {
    plan.attack_train_examples.push_back({members[i], 1});
  }
  for (const std::string& id : train_pool) {
    plan.attack_train_examples.push_back({id, 0});
  }
  for (size_t i = 0; i < test_pool.size(); ++i) {
    plan.attack_test_examples.push_back({members[train_pool.size() + i], 1});
  }
  for (const std::string& id : test_pool) {
    plan.attack_test_examples.push_back({id, 0});
  }
  return plan;
}

std::string SplitPlan::to_json() const {
  json obj;
  obj["seed"] = seed;
  obj["fractions"] = fractions;
  json assign = json::object();
  for (const auto& [id, part] : assignment) {
    assign[id] = partition_name(part);
  }
  obj["assignment"] = std::move(assign);
  return obj.dump(2);
}

SplitPlan SplitPlan::from_json(const std::string& json_text,
                               const std::vector<Document>& corpus) {
  json obj;
  try {
    obj = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed split plan JSON: ") + e.what());
  }
  if (!obj.contains("seed") || !obj.contains("fractions") ||
      !obj.contains("assignment")) {
    throw Error("split plan JSON must contain seed, fractions, assignment");
  }
  const uint64_t seed = obj["seed"].get<uint64_t>();
  const auto fr = obj["fractions"].get<std::array<double, 4>>();
  SplitPlan plan = make_splits(corpus, seed, fr);
  const auto& assign = obj["assignment"];
  if (assign.size() != plan.assignment.size()) {
    throw Error("split plan does not match corpus: assignment covers " +
                std::to_string(assign.size()) + " ids, corpus has " +
                std::to_string(plan.assignment.size()));
  }
  for (const auto& [id, name] : assign.items()) {
    auto it = plan.assignment.find(id);
    if (it == plan.assignment.end()) {
      throw Error("split plan names id \"" + id + "\" absent from corpus");
    }
    if (partition_from_name(name.get<std::string>()) != it->second) {
      throw Error("split plan does not match corpus: id \"" + id +
                  "\" recomputes to a different partition");
    }
  }
  return plan;
}

std::vector<Document> labeled_attack_docs(
    const std::vector<Document>& corpus,
    const std::vector<AttackExample>& examples) {
  std::unordered_map<std::string, const Document*> by_id;
  by_id.reserve(corpus.size());
  for (const Document& doc : corpus) by_id.emplace(doc.id, &doc);
  std::vector<Document> out;
  out.reserve(examples.size());
  for (const AttackExample& ex : examples) {
    auto it = by_id.find(ex.id);
    if (it == by_id.end()) {
      throw Error("attack example id \"" + ex.id + "\" absent from corpus");
    }
    Document doc = *it->second;
    doc.label = ex.label;
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace mia

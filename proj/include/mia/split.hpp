#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mia/corpus.hpp"

namespace mia {

enum class Partition { MemberTrain, ReferenceTrain, AttackTrain, AttackTest };

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);

// A labeled attack example: the document id plus its membership ground
// truth (1 = the target model trained on it, 0 = it never saw it).
struct AttackExample {
  std::string id;
  int label;
};

// Deterministic four-way split of a corpus.
//
// The assignment maps every id to exactly one partition; the partitions
// are disjoint and cover the corpus. The attack example sets are composed
// on top of the slices: the attack_train / attack_test partitions supply
// the non-members, and an equal number of member_train documents (which
// the target model trains on) supply the members, so both sets are
// label-balanced by construction.
//
// Everything is a pure function of (sorted ids, seed, fractions): ids are
// sorted bytewise, shuffled by a Fisher-Yates pass driven by SplitMix64,
// and sliced contiguously, so the same corpus yields the same plan on any
// platform and under any thread count.
struct SplitPlan {
  uint64_t seed = 0;
  // (member_train, reference_train, attack_train, attack_test)
  std::array<double, 4> fractions{};
  std::unordered_map<std::string, Partition> assignment;

  // Ids per partition, in shuffle order.
  std::array<std::vector<std::string>, 4> partitions;

  // Label-balanced example sets. Members come from member_train in shuffle
  // order: the first |attack_train slice| feed attack_train, the next
  // |attack_test slice| feed attack_test, so the two sets stay disjoint.
  std::vector<AttackExample> attack_train_examples;
  std::vector<AttackExample> attack_test_examples;

  const std::vector<std::string>& ids_of(Partition p) const {
    return partitions[static_cast<size_t>(p)];
  }

  std::string to_json() const;        // schema: {seed, fractions, assignment}
  static SplitPlan from_json(const std::string& json_text,
                             const std::vector<Document>& corpus);
};

SplitPlan make_splits(const std::vector<Document>& corpus, uint64_t seed,
                      const std::array<double, 4>& fractions);

// Applies the plan's labels to a copy of the corpus documents named by the
// attack example sets.
std::vector<Document> labeled_attack_docs(
    const std::vector<Document>& corpus,
    const std::vector<AttackExample>& examples);

}  // namespace mia

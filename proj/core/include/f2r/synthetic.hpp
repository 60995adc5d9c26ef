#pragma once

#include <map>
#include <string>
#include <vector>

#include "f2r/corpus.hpp"
#include "f2r/loaders.hpp"

namespace f2r {

/// Parameters of the generated verification corpus. Every feedback string is
/// filler + pronoun-forward(base response), so an exact oracle inverse
/// exists; the covered fillers are invertible by the rule cascade.
struct SyntheticSpec {
  int pairs_per_class = 2000;
  std::uint64_t seed = 0;
  SplitSpec split;  // split.seed is taken from seed when left at 0
  /// Adds a slice of fillers the rule cascade cannot invert (rewrite-style
  /// feedback); off by default so the oracle stays exact end to end.
  bool include_uncovered = false;
};

struct SyntheticScenario {
  std::vector<Turn> history;  // greeting + question
  std::string response;       // natural answer (the oracle)
  std::string feedback;       // filler o pronoun-forward(response)
  std::string filler;
  int template_id = 0;
  bool rule_covered = true;
};

struct OracleEntry {
  std::string response;
  std::string filler;
  bool rule_covered = true;
};

struct SyntheticCorpus {
  StyleCorpus style;
  std::vector<SyntheticScenario> feedback_scenarios;
  std::vector<SyntheticScenario> natural_scenarios;
  /// feedback text -> oracle response.
  std::map<std::string, OracleEntry> oracle;
  /// Distinct responses with their template ids; the distractor pool.
  std::vector<std::pair<std::string, int>> response_pool;

  const OracleEntry* find_oracle(const std::string& feedback) const;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

/// Maps a natural response into its feedback phrasing ("i am" -> "you are",
/// "my" -> "your", ...); the exact inverse of the rule cascade's pronoun
/// flips on the curated pools.
std::string pronoun_forward(const std::string& response);

/// 20-candidate ranking evaluation examples built from (history, response)
/// scenarios: 19 distractors drawn from other response templates.
std::vector<RankingExample> make_ranking_examples(
    const std::vector<StyleTransferExample>& naturals,
    const std::vector<std::pair<std::string, int>>& response_pool, int n_turns,
    std::uint64_t seed);

/// Token-overlap F1 (multiset precision/recall harmonic mean).
double token_overlap_f1(const std::vector<std::string>& predicted,
                        const std::vector<std::string>& reference);
double token_overlap_f1(const std::string& predicted, const std::string& reference);

void save_oracle_jsonl(const std::string& path, const SyntheticCorpus& corpus);
std::map<std::string, OracleEntry> load_oracle_jsonl(const std::string& path);

}  // namespace f2r

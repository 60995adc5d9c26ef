#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "f2r/generator.hpp"
#include "f2r/ranker.hpp"
#include "f2r/synthetic.hpp"
#include "f2r/trainer.hpp"

namespace f2r {

enum class Setting { kNoFeedback, kFeedback, kHeuristic, kFeed2Resp };

Setting setting_from_string(const std::string& name);
std::string setting_to_string(Setting s);

/// Everything a setting run consumes: the style corpus, the ranking
/// evaluation sets and the vocabulary they were encoded with.
struct ExperimentData {
  StyleCorpus style;
  std::vector<RankingExample> dev_eval;
  std::vector<RankingExample> test_eval;
  Vocab vocab;
};

struct ExperimentSpec {
  Setting setting = Setting::kNoFeedback;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int n_turns = 2;
  RankerConfig ranker;
  RankerTrainConfig ranker_train;
  // Converter decoding (FEED2RESP).
  int max_len = 16;
  double repetition_penalty = 2.0;
  EncodeCaps caps;
};

struct SettingReport {
  std::string setting;
  std::vector<std::uint64_t> seeds;
  std::vector<double> dev_hits;
  std::vector<double> test_hits;
  double dev_mean = 0.0, dev_variance = 0.0;
  double test_mean = 0.0, test_variance = 0.0;
  std::size_t train_pairs = 0;

  nlohmann::json to_json() const;
};

/// Greedy natural-style rewrite of one feedback example.
std::string convert_with_generator(const Generator& gen, const Vocab& vocab,
                                   const StyleTransferExample& feedback, int n_turns,
                                   int max_len, double repetition_penalty,
                                   const EncodeCaps& caps);

/// Ranker training pairs for a setting. NOFEEDBACK uses the natural
/// conversations alone; the other settings append one pair per feedback
/// example whose response field is the raw, heuristic-converted, or
/// generator-converted feedback. Contexts are identical across settings.
std::vector<RankingPair> build_setting_pairs(Setting setting, const ExperimentData& data,
                                             const ExperimentSpec& spec,
                                             const Generator* converter);

/// Trains one ranker per seed on the setting corpus and reports HITS@1/20 on
/// both evaluation sets (mean and unbiased variance across seeds).
SettingReport run_setting(const ExperimentSpec& spec, const ExperimentData& data,
                          const Generator* converter);

/// Aggregate CSV: one row per (setting, split) with mean and variance.
void write_reports_csv(const std::string& path, const std::vector<SettingReport>& reports);

double mean_of(const std::vector<double>& xs);
double variance_of(const std::vector<double>& xs);  // unbiased; 0 for n < 2

}  // namespace f2r

#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "f2r/corpus.hpp"
#include "f2r/loaders.hpp"
#include "f2r/params.hpp"
#include "f2r/transformer.hpp"

namespace f2r {

enum class RankerArch { kBi, kPoly };

RankerArch ranker_arch_from_string(const std::string& name);
std::string ranker_arch_to_string(RankerArch arch);

struct RankerConfig {
  RankerArch arch = RankerArch::kBi;
  int layers = 2;
  int heads = 2;
  int dim = 64;
  int codes = 1;  // context codes; the bi-encoder always pools with one
  int vocab_size = 0;
  int max_positions = 128;
  double init_std = 0.02;

  int ffn_dim() const { return 4 * dim; }
  void validate() const;
  nlohmann::json to_json() const;
  static RankerConfig from_json(const nlohmann::json& j);
};

/// Retrieval chatbot: two transformer encoders (context, candidate) with
/// attention pooling. The bi-encoder scores dot(context vector, candidate
/// vector); the poly-encoder keeps `codes` context vectors and lets each
/// candidate attend over them before the final dot product. With codes == 1
/// the two scoring paths coincide.
class Ranker {
 public:
  explicit Ranker(const RankerConfig& config, std::uint64_t seed = 0);

  const RankerConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Context codes (codes x dim) after pooling over the context encoder.
  ad::Var context_codes(ad::Tape& tape, const TapeBinding& p,
                        const std::vector<int>& context) const;
  /// Candidate summary vector (1 x dim).
  ad::Var candidate_vector(ad::Tape& tape, const TapeBinding& p,
                           const std::vector<int>& candidate) const;
  /// Candidate-conditioned score (1 x 1) from precomputed codes and vector.
  ad::Var pair_score(ad::Tape& tape, ad::Var codes, ad::Var candidate) const;

  double score_bi(const std::vector<int>& context, const std::vector<int>& candidate) const;
  std::vector<double> score_poly(const std::vector<int>& context,
                                 const std::vector<std::vector<int>>& candidates) const;
  /// Arch-dispatching convenience used by evaluation.
  std::vector<double> score(const std::vector<int>& context,
                            const std::vector<std::vector<int>>& candidates) const;

  void save(const std::string& path) const;
  static Ranker load(const std::string& path);

 private:
  ad::Var encode_tokens(ad::Tape& tape, const TapeBinding& p, const std::string& side,
                        const std::vector<int>& ids) const;

  RankerConfig config_;
  nn::StackDims dims_;
  ParamStore params_;
};

/// Fraction of examples whose correct candidate lands in the top k by score;
/// ties resolve toward the lower candidate index.
using Scorer = std::function<std::vector<double>(const RankingExample&)>;
double hits_at_k(const Scorer& scorer, const std::vector<RankingExample>& examples, int k);

/// Scorer backed by a trained ranker and a vocabulary.
Scorer make_ranker_scorer(const Ranker& ranker, const Vocab& vocab);

struct RankerTrainConfig {
  double lr = 2.5e-3;  // bi-encoder default; poly-encoder runs use 5e-5
  int batch_size = 8;
  int steps = 500;
  bool in_batch_negatives = true;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Training pair; RankingExamples with their provided candidate lists are
/// also accepted (in_batch_negatives = false).
struct RankingPair {
  std::string context;
  std::string response;
};

std::vector<RankingPair> load_ranking_pairs_jsonl(const std::string& path);
void save_ranking_pairs_jsonl(const std::string& path, const std::vector<RankingPair>& pairs);

/// Cross-entropy training. In-batch mode treats the other gold responses in
/// the batch as negatives; otherwise every example must carry its own
/// candidate list. Returns the mean loss of the final step.
double train_ranker(Ranker& ranker, const Vocab& vocab, const std::vector<RankingPair>& pairs,
                    const RankerTrainConfig& config);
double train_ranker_provided(Ranker& ranker, const Vocab& vocab,
                             const std::vector<RankingExample>& examples,
                             const RankerTrainConfig& config);

}  // namespace f2r

#pragma once

#include <array>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "f2r/corpus.hpp"
#include "f2r/generator.hpp"
#include "f2r/params.hpp"
#include "f2r/transformer.hpp"

namespace f2r {

struct DiscriminatorConfig {
  int layers = 4;
  int heads = 4;
  int token_dim = 256;
  int style_dim = 256;  // kept for configuration parity; carries no input
  int pos_dim = 256;
  int hidden = 256;
  int vocab_size = 0;
  int max_positions = 96;
  double init_std = 0.02;
  /// With history the classifier sees "h [RES] x"; without, x alone.
  bool use_history = true;

  int ffn_dim() const { return 4 * hidden; }
  void validate() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

struct StylePrediction {
  std::array<double, 2> probs{};
  Style predicted = Style::kNatural;
};

/// Attention rows of the pooling query, per layer and head, over the content
/// tokens (the query's self-weight is masked out, so each row is a
/// distribution over the inputs).
struct AttentionMaps {
  std::vector<std::string> tokens;
  std::vector<std::vector<std::vector<double>>> layers;  // [layer][head][token]
};

/// Transformer-encoder style classifier with a learned pooling query token.
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorConfig& config, std::uint64_t seed = 0);

  const DiscriminatorConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Class logits (1 x 2) on the tape. x is hard ids or a soft sequence.
  ad::Var logits(ad::Tape& tape, const TapeBinding& p, const SeqInput& x,
                 const std::vector<int>& history, nn::AttentionTrace* trace = nullptr) const;

  StylePrediction classify(const std::vector<int>& x, const std::vector<int>& history) const;
  StylePrediction classify(const SoftSequence& x, const std::vector<int>& history) const;

  /// Pooling-query attention maps for (x, h); tokens rendered via the vocab.
  AttentionMaps attention_maps(const std::vector<int>& x, const std::vector<int>& history,
                               const Vocab& vocab) const;

  void save(const std::string& path) const;
  static Discriminator load(const std::string& path);

 private:
  StylePrediction classify_input(const SeqInput& x, const std::vector<int>& history) const;

  DiscriminatorConfig config_;
  nn::StackDims dims_;
  ParamStore params_;
};

/// Writes {"tokens": [...], "layers": [[...]]} as JSON.
void export_attention(const Discriminator& disc, const std::vector<int>& x,
                      const std::vector<int>& history, const Vocab& vocab,
                      const std::string& out_path);

}  // namespace f2r

#pragma once

#include <nlohmann/json.hpp>
#include <variant>
#include <vector>

#include "f2r/corpus.hpp"
#include "f2r/params.hpp"
#include "f2r/soft_sequence.hpp"
#include "f2r/transformer.hpp"

namespace f2r {

/// Hard ids or a soft sequence already on the tape; both embed to rows of the
/// token table (lookup vs. expected embedding).
struct SoftInput {
  ad::Var probs;  // length x vocab
};
using SeqInput = std::variant<std::vector<int>, SoftInput>;

struct GeneratorConfig {
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int token_dim = 64;
  int style_dim = 64;
  int pos_dim = 64;
  int hidden = 64;
  int vocab_size = 0;
  int max_positions = 96;
  double init_std = 0.02;

  int ffn_dim() const { return 4 * hidden; }
  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

struct SoftDecodeOptions {
  int max_len = 50;
  double temperature = 1.0;
  /// When set, decoding stops after a step whose argmax is EOS (that step's
  /// distribution is kept). Gradient checks switch this off so the unroll
  /// length cannot jump under parameter perturbations.
  bool stop_at_eos = true;
};

/// Raises the cost of already-emitted tokens: positive logits are divided by
/// the penalty, negative ones multiplied. penalty = 1 is the identity.
void apply_repetition_penalty(Eigen::RowVectorXd& logits, const std::vector<int>& emitted,
                              double penalty);

/// Style-conditioned encoder-decoder. The target-style embedding is added to
/// every encoder input position; token embeddings are shared between the
/// encoder, the decoder and the output projection.
class Generator {
 public:
  explicit Generator(const GeneratorConfig& config, std::uint64_t seed = 0);

  const GeneratorConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Encoder over "history [RES] x" with the style embedding added to every
  /// position. x may be hard ids or a soft sequence on the same tape.
  ad::Var encode(ad::Tape& tape, const TapeBinding& p, const SeqInput& x,
                 const std::vector<int>& history, Style target_style) const;

  /// Teacher-forced decoder logits: feeds BOS + targets[0..n-2] and returns
  /// one logit row (over the vocabulary) per target position.
  ad::Var teacher_logits(ad::Tape& tape, const TapeBinding& p, ad::Var encoder_out,
                         const std::vector<int>& targets) const;

  /// Autoregressive soft decoding: each step feeds back the expected
  /// embedding of the previous step's distribution, keeping the whole unroll
  /// differentiable. Returns one Var per emitted position (1 x vocab each).
  std::vector<ad::Var> unroll_soft(ad::Tape& tape, const TapeBinding& p, ad::Var encoder_out,
                                   const SoftDecodeOptions& options) const;

  /// Greedy decoding with a repetition penalty. Deterministic; stops at EOS
  /// or after max_len tokens. Returned ids exclude BOS/EOS.
  std::vector<int> generate(const std::vector<int>& x, const std::vector<int>& history,
                            Style target_style, int max_len = 50,
                            double repetition_penalty = 2.0) const;

  /// Value-level soft forward pass (fresh tape, no gradients kept).
  SoftSequence forward_soft(const std::vector<int>& x, const std::vector<int>& history,
                            Style target_style, const SoftDecodeOptions& options) const;

  void save(const std::string& path) const;
  static Generator load(const std::string& path);

 private:
  ad::Var embed_sequence(ad::Tape& tape, const TapeBinding& p, const SeqInput& x) const;

  GeneratorConfig config_;
  nn::StackDims enc_dims_, dec_dims_;
  ParamStore params_;
};

}  // namespace f2r

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "f2r/corpus.hpp"
#include "f2r/losses.hpp"

namespace f2r {

/// Id-level training example: assembled history tokens plus response tokens.
struct EncodedExample {
  std::vector<int> history;
  std::vector<int> response;
  Style style = Style::kNatural;
};

struct EncodeCaps {
  int max_history_tokens = 32;
  int max_response_tokens = 24;
};

std::vector<EncodedExample> encode_examples(const Vocab& vocab,
                                            const std::vector<StyleTransferExample>& examples,
                                            int n_turns, const EncodeCaps& caps);

struct EncodedCorpus {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> valid;
  std::vector<EncodedExample> test;
};

EncodedCorpus encode_corpus(const Vocab& vocab, const StyleCorpus& corpus, int n_turns,
                            const EncodeCaps& caps);

struct PretrainConfig {
  int epochs = 0;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double mask_prob = 0.15;
  double shuffle_prob = 0.1;
  int batch_size = 8;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;
};

/// Denoising pretraining: encoder sees (history, corrupted response), decoder
/// reconstructs the clean response. Returns the mean training NLL of the last
/// epoch (0 epochs leaves the parameters untouched and returns 0).
double pretrain_generator(Generator& gen, const std::vector<EncodedExample>& corpus,
                          const PretrainConfig& config);

/// Mean self-reconstruction NLL over a corpus; the held-out yardstick for
/// pretraining.
double mean_reconstruction_nll(Generator& gen, const std::vector<EncodedExample>& corpus);

struct TrainConfig {
  double gen_lr = 5e-6;
  double disc_lr = 1e-4;
  double gen_weight_decay = 0.0;
  double disc_weight_decay = 0.0;
  GeneratorLossWeights weights;
  int batch_size = 8;
  int steps = 1000;
  int disc_steps_per_gen = 1;
  double style_eps = 1e-8;
  StyleLossForm style_form = StyleLossForm::kNegLog;
  int max_len = 50;
  double repetition_penalty = 2.0;
  double grad_clip = 1.0;
  int log_every = 10;
  int eval_every = 200;
  int eval_examples = 64;
  int checkpoint_every = 0;
  std::string checkpoint_dir;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HistoryRow {
  long step = 0;
  double loss_self = 0.0;
  double loss_cycle = 0.0;
  double loss_style = 0.0;
  double disc_loss = 0.0;
  double fooling_rate = 0.0;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  double final_fooling_rate = 0.0;
  double final_disc_accuracy = 0.0;
};

/// Fraction of feedback examples whose greedy natural-style transfer the
/// discriminator classifies as natural.
double fooling_rate(const Generator& gen, const Discriminator& disc,
                    const std::vector<EncodedExample>& feedback_examples, int max_len,
                    double repetition_penalty);

/// Discriminator accuracy on raw labeled examples.
double discriminator_accuracy(const Discriminator& disc,
                              const std::vector<EncodedExample>& examples);

/// Alternating adversarial loop: each round runs disc_steps_per_gen
/// discriminator updates (real examples plus detached generator transfers,
/// labeled with their source style) and one generator update minimizing the
/// weighted self + cycle + style objective. Aborts on non-finite loss.
TrainResult train_f2r(Generator& gen, Discriminator& disc, const EncodedCorpus& corpus,
                      const TrainConfig& config);

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows);

}  // namespace f2r

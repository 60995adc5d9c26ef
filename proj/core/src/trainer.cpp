#include "f2r/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace f2r {

namespace {

std::vector<int> truncate_left(std::vector<int> ids, int cap) {
  if (cap >= 0 && static_cast<int>(ids.size()) > cap) {
    ids.erase(ids.begin(), ids.end() - cap);
  }
  return ids;
}

std::vector<int> truncate_right(std::vector<int> ids, int cap) {
  if (cap >= 0 && static_cast<int>(ids.size()) > cap) ids.resize(static_cast<std::size_t>(cap));
  return ids;
}

}  // namespace

std::vector<EncodedExample> encode_examples(const Vocab& vocab,
                                            const std::vector<StyleTransferExample>& examples,
                                            int n_turns, const EncodeCaps& caps) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedExample e;
    e.history = truncate_left(vocab.encode(assemble_history(ex.history, n_turns)),
                              caps.max_history_tokens);
    e.response = truncate_right(vocab.encode(ex.response), caps.max_response_tokens);
    e.style = ex.style;
    if (e.response.empty()) continue;
    out.push_back(std::move(e));
  }
  return out;
}

EncodedCorpus encode_corpus(const Vocab& vocab, const StyleCorpus& corpus, int n_turns,
                            const EncodeCaps& caps) {
  EncodedCorpus out;
  out.train = encode_examples(vocab, corpus.train, n_turns, caps);
  out.valid = encode_examples(vocab, corpus.valid, n_turns, caps);
  out.test = encode_examples(vocab, corpus.test, n_turns, caps);
  return out;
}

namespace {

std::vector<int> corrupt_response(const std::vector<int>& ids, double mask_prob,
                                  double shuffle_prob, Rng& rng) {
  std::vector<int> out = ids;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int& id : out) {
    if (mask_prob > 0.0 && u(rng) < mask_prob) id = Vocab::kUnk;
  }
  if (shuffle_prob > 0.0) {
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (u(rng) < shuffle_prob) std::swap(out[i], out[i + 1]);
    }
  }
  return out;
}

}  // namespace

double pretrain_generator(Generator& gen, const std::vector<EncodedExample>& corpus,
                          const PretrainConfig& config) {
  if (config.epochs <= 0) return 0.0;
  if (corpus.empty()) throw Error("pretrain_generator: empty corpus");

  Rng rng = derive_rng(config.seed, "pretrain");
  AdamW opt(config.lr, config.weight_decay);

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double last_epoch_nll = 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0.0;
    std::size_t scored = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(config.batch_size));
      gen.params().zero_grads();
      const double inv = 1.0 / static_cast<double>(end - at);

      for (std::size_t k = at; k < end; ++k) {
        const EncodedExample& ex = corpus[order[k]];
        const std::vector<int> noised =
            corrupt_response(ex.response, config.mask_prob, config.shuffle_prob, rng);
        std::vector<int> target = ex.response;
        target.push_back(Vocab::kEos);

        ad::Tape tape;
        TapeBinding p(tape, gen.params());
        ad::Var enc = gen.encode(tape, p, noised, ex.history, ex.style);
        ad::Var loss = nll_from_logits(tape, gen.teacher_logits(tape, p, enc, target), target);
        ad::Var scaled = tape.scale(loss, inv);
        tape.backward(scaled);
        p.flush();
        epoch_nll += tape.value(loss)(0, 0);
        ++scored;
      }
      gen.params().clip_grads(config.grad_clip);
      opt.step(gen.params());
      gen.params().zero_grads();
    }
    last_epoch_nll = epoch_nll / static_cast<double>(scored);
  }
  return last_epoch_nll;
}

double mean_reconstruction_nll(Generator& gen, const std::vector<EncodedExample>& corpus) {
  if (corpus.empty()) throw Error("mean_reconstruction_nll: empty corpus");
  double total = 0.0;
  for (const auto& ex : corpus) {
    total += loss_self(gen, ex.response, ex.history, ex.style, /*accumulate_grads=*/false);
  }
  return total / static_cast<double>(corpus.size());
}

void TrainConfig::validate() const {
  if (gen_lr <= 0 || disc_lr <= 0) throw Error("train: learning rates must be positive");
  if (weights.self_rec < 0 || weights.cycle < 0 || weights.style < 0) {
    throw Error("train: loss weights must be >= 0");
  }
  if (style_eps <= 0 || style_eps > 1e-4) throw Error("train: style_eps must be in (0, 1e-4]");
  if (batch_size < 1) throw Error("train: batch_size must be >= 1");
  if (steps < 0) throw Error("train: steps must be >= 0");
  if (disc_steps_per_gen < 0) throw Error("train: disc_steps_per_gen must be >= 0");
  if (max_len < 1) throw Error("train: max_len must be >= 1");
}

double fooling_rate(const Generator& gen, const Discriminator& disc,
                    const std::vector<EncodedExample>& feedback_examples, int max_len,
                    double repetition_penalty) {
  if (feedback_examples.empty()) return 0.0;
  std::size_t fooled = 0;
  for (const auto& ex : feedback_examples) {
    const auto transferred =
        gen.generate(ex.response, ex.history, Style::kNatural, max_len, repetition_penalty);
    if (transferred.empty()) continue;
    if (disc.classify(transferred, ex.history).predicted == Style::kNatural) ++fooled;
  }
  return static_cast<double>(fooled) / static_cast<double>(feedback_examples.size());
}

double discriminator_accuracy(const Discriminator& disc,
                              const std::vector<EncodedExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (disc.classify(ex.response, ex.history).predicted == ex.style) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train_f2r(Generator& gen, Discriminator& disc, const EncodedCorpus& corpus,
                      const TrainConfig& config) {
  config.validate();
  if (corpus.train.empty()) throw Error("train_f2r: empty training corpus");
  const bool has_both = [&] {
    bool n = false, f = false;
    for (const auto& ex : corpus.train) (ex.style == Style::kNatural ? n : f) = true;
    return n && f;
  }();
  if (!has_both) throw Error("train_f2r: corpus must contain both styles");

  Rng rng = derive_rng(config.seed, "train-f2r");
  AdamW gen_opt(config.gen_lr, config.gen_weight_decay);
  AdamW disc_opt(config.disc_lr, config.disc_weight_decay);

  std::vector<EncodedExample> valid_feedback;
  for (const auto& ex : corpus.valid) {
    if (ex.style == Style::kFeedback) valid_feedback.push_back(ex);
  }
  if (static_cast<int>(valid_feedback.size()) > config.eval_examples) {
    valid_feedback.resize(static_cast<std::size_t>(config.eval_examples));
  }

  SoftDecodeOptions soft_opts;
  soft_opts.max_len = config.max_len;

  std::vector<std::size_t> order(corpus.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  auto next_batch = [&]() {
    std::vector<std::size_t> batch;
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    return batch;
  };

  TrainResult result;
  double last_fooling = 0.0;

  for (long step = 1; step <= config.steps; ++step) {
    const auto batch = next_batch();

    // Generator update; transfers are captured for the discriminator batch.
    LossBreakdown sums;
    std::vector<DiscItem> disc_batch;
    gen.params().zero_grads();
    for (std::size_t idx : batch) {
      const EncodedExample& ex = corpus.train[idx];
      SoftSequence transferred;
      const LossBreakdown lb = generator_example_losses(
          gen, disc, ex.response, ex.history, ex.style, config.weights, soft_opts,
          config.style_form, config.style_eps, /*accumulate_grads=*/true, &transferred);
      sums.self_rec += lb.self_rec;
      sums.cycle += lb.cycle;
      sums.style += lb.style;
      sums.total += lb.total;
      disc_batch.push_back(DiscItem{ex.response, ex.history, ex.style});
      disc_batch.push_back(DiscItem{std::move(transferred), ex.history, ex.style});
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    sums.self_rec *= inv;
    sums.cycle *= inv;
    sums.style *= inv;
    sums.total *= inv;
    if (!std::isfinite(sums.total)) {
      throw Error("train_f2r: non-finite loss at step " + std::to_string(step));
    }
    // Gradients were accumulated per example; rescale to the batch mean.
    for (Tensor* t : gen.params().all()) t->grad *= inv;
    gen.params().clip_grads(config.grad_clip);
    gen_opt.step(gen.params());
    gen.params().zero_grads();

    double disc_loss = 0.0;
    for (int d = 0; d < config.disc_steps_per_gen; ++d) {
      disc_loss = discriminator_step(disc, disc_batch, disc_opt, config.grad_clip);
    }
    if (!std::isfinite(disc_loss)) {
      throw Error("train_f2r: non-finite discriminator loss at step " + std::to_string(step));
    }

    if (config.eval_every > 0 && (step % config.eval_every == 0 || step == config.steps)) {
      last_fooling = fooling_rate(gen, disc, valid_feedback, config.max_len,
                                  config.repetition_penalty);
    }
    if (config.log_every > 0 && (step % config.log_every == 0 || step == config.steps)) {
      result.history.push_back(HistoryRow{step, sums.self_rec, sums.cycle, sums.style, disc_loss,
                                          last_fooling});
    }
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 &&
        !config.checkpoint_dir.empty()) {
      gen.save(config.checkpoint_dir + "/gen_step" + std::to_string(step) + ".ckpt");
      disc.save(config.checkpoint_dir + "/disc_step" + std::to_string(step) + ".ckpt");
    }
  }

  result.final_fooling_rate =
      fooling_rate(gen, disc, valid_feedback, config.max_len, config.repetition_penalty);
  std::vector<EncodedExample> valid_all = corpus.valid;
  result.final_disc_accuracy = discriminator_accuracy(disc, valid_all);
  last_fooling = result.final_fooling_rate;
  return result;
}

void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << "step,loss_self,loss_cycle,loss_style,disc_loss,fooling_rate\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, r.loss_self,
                  r.loss_cycle, r.loss_style, r.disc_loss, r.fooling_rate);
    os << buf;
  }
}

}  // namespace f2r

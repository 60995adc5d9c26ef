#pragma once

#include <variant>
#include <vector>

#include "f2r/discriminator.hpp"
#include "f2r/generator.hpp"
#include "f2r/optim.hpp"

namespace f2r {

enum class StyleLossForm {
  kNegLog,   // -log p(target style); bounded below by 0
  kLiteral,  // -p(target style); in [-1, 0]
};

/// Summed negative log-likelihood of the targets under per-position
/// probability rows. Closed-form oracle used by tests: uniform rows give
/// |targets| * ln(vocab).
double sequence_nll(const ad::Matrix& stepwise_probs, const std::vector<int>& targets);

/// Style loss value for a given discriminator probability of the target
/// style. The log form clamps at eps.
double style_loss_from_prob(double p_target, StyleLossForm form, double eps);

/// Tape-level summed NLL from logits rows (one row per target position).
ad::Var nll_from_logits(ad::Tape& tape, ad::Var logits, const std::vector<int>& targets);

/// Teacher-forced reconstruction of x given (x, h, s) with target style equal
/// to the source style. Scores exactly the tokens of x (trimmed of trailing
/// padding / post-EOS tokens). When accumulate_grads is set the gradient is
/// added into gen.params().
double loss_self(Generator& gen, const std::vector<int>& x, const std::vector<int>& h, Style s,
                 bool accumulate_grads = false);

/// x -> soft transfer to style s_hat -> reconstruct x with target style s.
/// Differentiable through both passes.
double loss_cycle(Generator& gen, const std::vector<int>& x, const std::vector<int>& h, Style s,
                  Style s_hat, const SoftDecodeOptions& options, bool accumulate_grads = false);

/// Reconstruction NLL of `target` when the encoder sees a given soft x
/// (second half of the cycle objective, exposed for oracle tests).
double reconstruction_nll_from_soft(Generator& gen, const SoftSequence& soft_x,
                                    const std::vector<int>& h, Style s,
                                    const std::vector<int>& target);

/// Discriminator confidence that the soft transfer of x reached style s_hat.
/// Discriminator parameters stay frozen; gradients (if requested) flow into
/// the generator only.
double loss_style(Generator& gen, const Discriminator& disc, const std::vector<int>& x,
                  const std::vector<int>& h, Style s_hat, const SoftDecodeOptions& options,
                  StyleLossForm form = StyleLossForm::kNegLog, double eps = 1e-8,
                  bool accumulate_grads = false);

/// One labeled classification item; x is hard ids or a detached soft
/// sequence (generator outputs enter the discriminator batch as constants).
struct DiscItem {
  std::variant<std::vector<int>, SoftSequence> x;
  std::vector<int> history;
  Style label = Style::kNatural;
};

/// Mean cross-entropy of the batch. Accumulates gradients into disc.params()
/// when accumulate_grads is set; callers drive the optimizer.
double discriminator_loss(Discriminator& disc, const std::vector<DiscItem>& batch,
                          bool accumulate_grads = false);

/// Cross-entropy + one optimizer step. Returns the pre-step batch loss.
double discriminator_step(Discriminator& disc, const std::vector<DiscItem>& batch, AdamW& opt,
                          double grad_clip = 0.0);

struct LossBreakdown {
  double self_rec = 0.0;
  double cycle = 0.0;
  double style = 0.0;
  double total = 0.0;
};

struct GeneratorLossWeights {
  double self_rec = 1.0;
  double cycle = 1.0;
  double style = 1.0;
};

/// Fused per-example generator objective sharing one soft pass between the
/// cycle and style terms. Reconstruction targets get EOS appended so the
/// model learns to terminate. Returns the unweighted loss values; gradients
/// of the weighted total accumulate into gen.params().
LossBreakdown generator_example_losses(Generator& gen, const Discriminator& disc,
                                       const std::vector<int>& x, const std::vector<int>& h,
                                       Style s, const GeneratorLossWeights& weights,
                                       const SoftDecodeOptions& options, StyleLossForm form,
                                       double eps, bool accumulate_grads = true,
                                       SoftSequence* transferred = nullptr);

}  // namespace f2r

#include "f2r/losses.hpp"

#include <cmath>

namespace f2r {

namespace {

std::vector<int> effective_target(const std::vector<int>& x) {
  const auto t = trim_sequence(x, Vocab::kPad, Vocab::kEos);
  if (t.empty()) throw Error("loss: empty target sequence");
  return t;
}

// EOS is a decoder-side termination target; the encoder sees content only.
std::vector<int> encoder_view(std::vector<int> target) {
  while (!target.empty() && target.back() == Vocab::kEos) target.pop_back();
  return target;
}

ad::Var concat_steps(ad::Tape& tape, const std::vector<ad::Var>& dists) {
  if (dists.empty()) throw Error("loss: soft transfer produced no steps");
  return dists.size() == 1 ? dists[0] : tape.concat_rows(dists);
}

ad::Var style_loss_node(ad::Tape& tape, ad::Var disc_logits, Style s_hat, StyleLossForm form,
                        double eps) {
  if (form == StyleLossForm::kNegLog) {
    ad::Var probs = tape.softmax_rows(disc_logits);
    ad::Var picked = tape.gather_coeffs(probs, {{0, style_value(s_hat)}});
    return tape.scale(tape.log(tape.clamp_min(picked, eps)), -1.0);
  }
  ad::Var probs = tape.softmax_rows(disc_logits);
  ad::Var picked = tape.gather_coeffs(probs, {{0, style_value(s_hat)}});
  return tape.scale(picked, -1.0);
}

}  // namespace

double sequence_nll(const ad::Matrix& stepwise_probs, const std::vector<int>& targets) {
  if (static_cast<std::size_t>(stepwise_probs.rows()) < targets.size()) {
    throw Error("sequence_nll: fewer probability rows than targets");
  }
  double nll = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int t = targets[i];
    if (t < 0 || t >= stepwise_probs.cols()) throw Error("sequence_nll: target out of range");
    nll -= std::log(stepwise_probs(static_cast<Eigen::Index>(i), t));
  }
  return nll;
}

double style_loss_from_prob(double p_target, StyleLossForm form, double eps) {
  if (form == StyleLossForm::kNegLog) return -std::log(std::max(p_target, eps));
  return -p_target;
}

ad::Var nll_from_logits(ad::Tape& tape, ad::Var logits, const std::vector<int>& targets) {
  if (targets.empty()) throw Error("nll_from_logits: empty targets");
  if (tape.value(logits).rows() != static_cast<Eigen::Index>(targets.size())) {
    throw Error("nll_from_logits: logits rows must match target length");
  }
  ad::Var ls = tape.log_softmax_rows(logits);
  std::vector<std::pair<int, int>> picks;
  picks.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    picks.emplace_back(static_cast<int>(i), targets[i]);
  }
  return tape.scale(tape.sum(tape.gather_coeffs(ls, std::move(picks))), -1.0);
}

double loss_self(Generator& gen, const std::vector<int>& x, const std::vector<int>& h, Style s,
                 bool accumulate_grads) {
  const std::vector<int> target = effective_target(x);
  ad::Tape tape;
  TapeBinding p = accumulate_grads ? TapeBinding(tape, gen.params())
                                   : TapeBinding(tape, static_cast<const ParamStore&>(gen.params()));
  ad::Var enc = gen.encode(tape, p, encoder_view(target), h, s);
  ad::Var logits = gen.teacher_logits(tape, p, enc, target);
  ad::Var loss = nll_from_logits(tape, logits, target);
  if (accumulate_grads) {
    tape.backward(loss);
    p.flush();
  }
  return tape.value(loss)(0, 0);
}

double loss_cycle(Generator& gen, const std::vector<int>& x, const std::vector<int>& h, Style s,
                  Style s_hat, const SoftDecodeOptions& options, bool accumulate_grads) {
  if (s_hat == s) throw Error("loss_cycle: target style must differ from source style");
  const std::vector<int> target = effective_target(x);
  ad::Tape tape;
  TapeBinding p = accumulate_grads ? TapeBinding(tape, gen.params())
                                   : TapeBinding(tape, static_cast<const ParamStore&>(gen.params()));
  ad::Var enc1 = gen.encode(tape, p, encoder_view(target), h, s_hat);
  ad::Var soft = concat_steps(tape, gen.unroll_soft(tape, p, enc1, options));
  ad::Var enc2 = gen.encode(tape, p, SoftInput{soft}, h, s);
  ad::Var logits = gen.teacher_logits(tape, p, enc2, target);
  ad::Var loss = nll_from_logits(tape, logits, target);
  if (accumulate_grads) {
    tape.backward(loss);
    p.flush();
  }
  return tape.value(loss)(0, 0);
}

double reconstruction_nll_from_soft(Generator& gen, const SoftSequence& soft_x,
                                    const std::vector<int>& h, Style s,
                                    const std::vector<int>& target_in) {
  const std::vector<int> target = effective_target(target_in);
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(gen.params()));
  ad::Var soft = tape.leaf(soft_x.probs, /*requires_grad=*/false);
  ad::Var enc = gen.encode(tape, p, SoftInput{soft}, h, s);
  ad::Var logits = gen.teacher_logits(tape, p, enc, target);
  ad::Var loss = nll_from_logits(tape, logits, target);
  return tape.value(loss)(0, 0);
}

double loss_style(Generator& gen, const Discriminator& disc, const std::vector<int>& x,
                  const std::vector<int>& h, Style s_hat, const SoftDecodeOptions& options,
                  StyleLossForm form, double eps, bool accumulate_grads) {
  const std::vector<int> input = encoder_view(effective_target(x));
  ad::Tape tape;
  TapeBinding pg = accumulate_grads
                       ? TapeBinding(tape, gen.params())
                       : TapeBinding(tape, static_cast<const ParamStore&>(gen.params()));
  TapeBinding pd(tape, disc.params());
  ad::Var enc = gen.encode(tape, pg, input, h, s_hat);
  ad::Var soft = concat_steps(tape, gen.unroll_soft(tape, pg, enc, options));
  ad::Var dlogits = disc.logits(tape, pd, SoftInput{soft}, h);
  ad::Var loss = style_loss_node(tape, dlogits, s_hat, form, eps);
  if (accumulate_grads) {
    tape.backward(loss);
    pg.flush();
  }
  return tape.value(loss)(0, 0);
}

double discriminator_loss(Discriminator& disc, const std::vector<DiscItem>& batch,
                          bool accumulate_grads) {
  if (batch.empty()) throw Error("discriminator_loss: empty batch");
  ad::Tape tape;
  TapeBinding p = accumulate_grads
                      ? TapeBinding(tape, disc.params())
                      : TapeBinding(tape, static_cast<const ParamStore&>(disc.params()));
  std::vector<ad::Var> items;
  for (const auto& item : batch) {
    ad::Var lg;
    if (std::holds_alternative<std::vector<int>>(item.x)) {
      lg = disc.logits(tape, p, std::get<std::vector<int>>(item.x), item.history);
    } else {
      ad::Var soft = tape.leaf(std::get<SoftSequence>(item.x).probs, /*requires_grad=*/false);
      lg = disc.logits(tape, p, SoftInput{soft}, item.history);
    }
    ad::Var ls = tape.log_softmax_rows(lg);
    items.push_back(tape.scale(tape.gather_coeffs(ls, {{0, style_value(item.label)}}), -1.0));
  }
  ad::Var loss = tape.scale(tape.sum(tape.concat_rows(items)), 1.0 / static_cast<double>(items.size()));
  if (accumulate_grads) {
    tape.backward(loss);
    p.flush();
  }
  return tape.value(loss)(0, 0);
}

double discriminator_step(Discriminator& disc, const std::vector<DiscItem>& batch, AdamW& opt,
                          double grad_clip) {
  disc.params().zero_grads();
  const double loss = discriminator_loss(disc, batch, /*accumulate_grads=*/true);
  disc.params().clip_grads(grad_clip);
  opt.step(disc.params());
  disc.params().zero_grads();
  return loss;
}

LossBreakdown generator_example_losses(Generator& gen, const Discriminator& disc,
                                       const std::vector<int>& x, const std::vector<int>& h,
                                       Style s, const GeneratorLossWeights& weights,
                                       const SoftDecodeOptions& options, StyleLossForm form,
                                       double eps, bool accumulate_grads,
                                       SoftSequence* transferred) {
  const Style s_hat = flipped(s);
  std::vector<int> target = effective_target(x);
  std::vector<int> target_eos = target;
  target_eos.push_back(Vocab::kEos);

  ad::Tape tape;
  TapeBinding pg = accumulate_grads
                       ? TapeBinding(tape, gen.params())
                       : TapeBinding(tape, static_cast<const ParamStore&>(gen.params()));
  TapeBinding pd(tape, static_cast<const Discriminator&>(disc).params());

  // Self reconstruction.
  ad::Var enc_s = gen.encode(tape, pg, target, h, s);
  ad::Var l_self = nll_from_logits(tape, gen.teacher_logits(tape, pg, enc_s, target_eos),
                                   target_eos);

  // One soft transfer shared by the cycle and style terms.
  ad::Var enc_hat = gen.encode(tape, pg, target, h, s_hat);
  ad::Var soft = concat_steps(tape, gen.unroll_soft(tape, pg, enc_hat, options));

  ad::Var enc_back = gen.encode(tape, pg, SoftInput{soft}, h, s);
  ad::Var l_cycle = nll_from_logits(tape, gen.teacher_logits(tape, pg, enc_back, target_eos),
                                    target_eos);

  ad::Var dlogits = disc.logits(tape, pd, SoftInput{soft}, h);
  ad::Var l_style = style_loss_node(tape, dlogits, s_hat, form, eps);

  ad::Var total = tape.add(tape.add(tape.scale(l_self, weights.self_rec),
                                    tape.scale(l_cycle, weights.cycle)),
                           tape.scale(l_style, weights.style));

  LossBreakdown out;
  out.self_rec = tape.value(l_self)(0, 0);
  out.cycle = tape.value(l_cycle)(0, 0);
  out.style = tape.value(l_style)(0, 0);
  out.total = tape.value(total)(0, 0);

  if (accumulate_grads) {
    tape.backward(total);
    pg.flush();
  }
  if (transferred) {
    const ad::Matrix& sv = tape.value(soft);
    transferred->probs = sv;
  }
  return out;
}

}  // namespace f2r

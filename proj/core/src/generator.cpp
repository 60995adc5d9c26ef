#include "f2r/generator.hpp"

#include <algorithm>
#include <cmath>

namespace f2r {

void SoftSequence::validate(double tol) const {
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double v = probs(r, c);
      if (v < 0.0) throw Error("SoftSequence: negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw Error("SoftSequence: row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
}

std::vector<int> SoftSequence::hard_tokens() const {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    ids.push_back(static_cast<int>(best));
  }
  return ids;
}

SoftSequence SoftSequence::one_hot(const std::vector<int>& ids, int vocab) {
  SoftSequence s;
  s.probs = ad::Matrix::Zero(static_cast<Eigen::Index>(ids.size()), vocab);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) throw Error("SoftSequence: id out of range");
    s.probs(static_cast<Eigen::Index>(i), ids[i]) = 1.0;
  }
  return s;
}

std::vector<int> trim_sequence(const std::vector<int>& ids, int pad_id, int eos_id) {
  std::vector<int> out;
  for (int id : ids) {
    if (id == eos_id) {
      out.push_back(id);
      break;
    }
    out.push_back(id);
  }
  while (!out.empty() && out.back() == pad_id) out.pop_back();
  return out;
}

void GeneratorConfig::validate() const {
  if (encoder_layers < 1 || decoder_layers < 1) throw Error("generator: layer counts must be >= 1");
  if (heads < 1) throw Error("generator: head count must be >= 1");
  if (token_dim < 1 || style_dim < 1 || pos_dim < 1 || hidden < 1) {
    throw Error("generator: embedding sizes must be positive");
  }
  if (token_dim != hidden || style_dim != hidden || pos_dim != hidden) {
    throw Error("generator: token/style/positional embedding sizes must equal the hidden size");
  }
  if (hidden % heads != 0) throw Error("generator: heads must divide the hidden size");
  if (vocab_size < 1) throw Error("generator: vocab_size must be set");
  if (max_positions < 2) throw Error("generator: max_positions must be >= 2");
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers},
          {"heads", heads},
          {"token_dim", token_dim},
          {"style_dim", style_dim},
          {"pos_dim", pos_dim},
          {"hidden", hidden},
          {"vocab_size", vocab_size},
          {"max_positions", max_positions},
          {"init_std", init_std}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
  c.heads = j.value("heads", c.heads);
  c.token_dim = j.value("token_dim", c.token_dim);
  c.style_dim = j.value("style_dim", c.style_dim);
  c.pos_dim = j.value("pos_dim", c.pos_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

void apply_repetition_penalty(Eigen::RowVectorXd& logits, const std::vector<int>& emitted,
                              double penalty) {
  if (penalty < 1.0) throw Error("repetition penalty must be >= 1");
  std::vector<int> seen;
  for (int id : emitted) {
    if (id < 0 || id >= logits.size()) continue;
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
    seen.push_back(id);
    if (logits(id) > 0.0) {
      logits(id) /= penalty;
    } else {
      logits(id) *= penalty;
    }
  }
}

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  enc_dims_ = nn::StackDims{config_.encoder_layers, config_.heads, config_.hidden,
                            config_.ffn_dim()};
  dec_dims_ = nn::StackDims{config_.decoder_layers, config_.heads, config_.hidden,
                            config_.ffn_dim()};
  Rng rng = derive_rng(seed, "generator-init");
  params_.normal("tok_emb", config_.vocab_size, config_.hidden, 0.1, rng);
  params_.normal("style_emb", 2, config_.hidden, 0.1, rng);
  params_.normal("pos_enc", config_.max_positions, config_.hidden, 0.05, rng);
  params_.normal("pos_dec", config_.max_positions, config_.hidden, 0.05, rng);
  nn::create_encoder_stack(params_, "enc", enc_dims_, config_.init_std, rng);
  nn::create_decoder_stack(params_, "dec", dec_dims_, config_.init_std, rng);
}

ad::Var Generator::embed_sequence(ad::Tape& tape, const TapeBinding& p, const SeqInput& x) const {
  if (std::holds_alternative<std::vector<int>>(x)) {
    return tape.gather_rows(p["tok_emb"], std::get<std::vector<int>>(x));
  }
  return tape.matmul(std::get<SoftInput>(x).probs, p["tok_emb"]);
}

ad::Var Generator::encode(ad::Tape& tape, const TapeBinding& p, const SeqInput& x,
                          const std::vector<int>& history, Style target_style) const {
  std::vector<ad::Var> parts;
  std::vector<int> prefix = history;
  prefix.push_back(Vocab::kRes);
  parts.push_back(tape.gather_rows(p["tok_emb"], prefix));
  parts.push_back(embed_sequence(tape, p, x));
  ad::Var emb = tape.concat_rows(parts);

  const int total = static_cast<int>(tape.value(emb).rows());
  if (total > config_.max_positions) {
    throw Error("generator: input length " + std::to_string(total) +
                " exceeds positional capacity " + std::to_string(config_.max_positions));
  }
  emb = tape.add(emb, tape.slice_rows(p["pos_enc"], 0, total));
  ad::Var style_row = tape.gather_rows(p["style_emb"], {style_value(target_style)});
  emb = tape.add_rowwise(emb, style_row);
  return nn::encoder_stack(tape, p, "enc", enc_dims_, emb);
}

namespace {

/// Decoder pass over the given input embeddings; returns logits rows against
/// the shared token table.
ad::Var decoder_logits(ad::Tape& tape, const TapeBinding& p, const nn::StackDims& dims,
                       ad::Var dec_input, ad::Var encoder_out) {
  ad::Var h = nn::decoder_stack(tape, p, "dec", dims, dec_input, encoder_out);
  return tape.matmul_nt(h, p["tok_emb"]);
}

}  // namespace

ad::Var Generator::teacher_logits(ad::Tape& tape, const TapeBinding& p, ad::Var encoder_out,
                                  const std::vector<int>& targets) const {
  if (targets.empty()) throw Error("generator: teacher forcing needs a nonempty target");
  std::vector<int> dec_ids;
  dec_ids.push_back(Vocab::kBos);
  dec_ids.insert(dec_ids.end(), targets.begin(), targets.end() - 1);
  const int n = static_cast<int>(dec_ids.size());
  if (n > config_.max_positions) {
    throw Error("generator: target length exceeds positional capacity");
  }
  ad::Var emb = tape.gather_rows(p["tok_emb"], dec_ids);
  emb = tape.add(emb, tape.slice_rows(p["pos_dec"], 0, n));
  return decoder_logits(tape, p, dec_dims_, emb, encoder_out);
}

std::vector<ad::Var> Generator::unroll_soft(ad::Tape& tape, const TapeBinding& p,
                                            ad::Var encoder_out,
                                            const SoftDecodeOptions& options) const {
  if (options.max_len < 1) throw Error("generator: max_len must be >= 1");
  if (options.max_len + 1 > config_.max_positions) {
    throw Error("generator: max_len exceeds positional capacity");
  }
  if (options.temperature <= 0.0) throw Error("generator: temperature must be positive");

  // PAD and BOS can never be produced; the same mask applies in generate().
  ad::Matrix logit_mask = ad::Matrix::Zero(1, config_.vocab_size);
  logit_mask(0, Vocab::kPad) = -1e30;
  logit_mask(0, Vocab::kBos) = -1e30;
  ad::Var mask = tape.leaf(logit_mask, /*requires_grad=*/false);

  std::vector<ad::Var> prefix_emb;
  prefix_emb.push_back(tape.gather_rows(p["tok_emb"], {Vocab::kBos}));
  std::vector<ad::Var> dists;

  for (int step = 0; step < options.max_len; ++step) {
    ad::Var emb = prefix_emb.size() == 1 ? prefix_emb[0] : tape.concat_rows(prefix_emb);
    const int n = static_cast<int>(tape.value(emb).rows());
    emb = tape.add(emb, tape.slice_rows(p["pos_dec"], 0, n));
    ad::Var logits = decoder_logits(tape, p, dec_dims_, emb, encoder_out);
    ad::Var last = tape.slice_rows(logits, n - 1, 1);
    if (options.temperature != 1.0) last = tape.scale(last, 1.0 / options.temperature);
    last = tape.add(last, mask);
    ad::Var dist = tape.softmax_rows(last);
    dists.push_back(dist);

    Eigen::Index argmax = 0;
    tape.value(dist).row(0).maxCoeff(&argmax);
    if (options.stop_at_eos && static_cast<int>(argmax) == Vocab::kEos) break;

    prefix_emb.push_back(tape.matmul(dist, p["tok_emb"]));
  }
  return dists;
}

std::vector<int> Generator::generate(const std::vector<int>& x, const std::vector<int>& history,
                                     Style target_style, int max_len,
                                     double repetition_penalty) const {
  if (max_len < 1) throw Error("generator: max_len must be >= 1");
  if (max_len + 1 > config_.max_positions) {
    throw Error("generator: max_len exceeds positional capacity");
  }
  if (repetition_penalty < 1.0) throw Error("generator: repetition penalty must be >= 1");

  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  ad::Var enc = encode(tape, p, x, history, target_style);

  std::vector<int> emitted;
  while (static_cast<int>(emitted.size()) < max_len) {
    std::vector<int> dec_ids;
    dec_ids.push_back(Vocab::kBos);
    dec_ids.insert(dec_ids.end(), emitted.begin(), emitted.end());
    const int n = static_cast<int>(dec_ids.size());
    ad::Var emb = tape.gather_rows(p["tok_emb"], dec_ids);
    emb = tape.add(emb, tape.slice_rows(p["pos_dec"], 0, n));
    ad::Var logits = decoder_logits(tape, p, dec_dims_, emb, enc);

    Eigen::RowVectorXd row = tape.value(logits).row(n - 1);
    row(Vocab::kPad) = -1e30;
    row(Vocab::kBos) = -1e30;
    apply_repetition_penalty(row, emitted, repetition_penalty);
    Eigen::Index best = 0;
    row.maxCoeff(&best);
    if (static_cast<int>(best) == Vocab::kEos) break;
    emitted.push_back(static_cast<int>(best));
  }
  return emitted;
}

SoftSequence Generator::forward_soft(const std::vector<int>& x, const std::vector<int>& history,
                                     Style target_style, const SoftDecodeOptions& options) const {
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  ad::Var enc = encode(tape, p, x, history, target_style);
  const auto dists = unroll_soft(tape, p, enc, options);

  SoftSequence out;
  out.probs = ad::Matrix(static_cast<Eigen::Index>(dists.size()), config_.vocab_size);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    out.probs.row(static_cast<Eigen::Index>(i)) = tape.value(dists[i]).row(0);
  }
  return out;
}

void Generator::save(const std::string& path) const {
  save_checkpoint(path, "generator", config_.to_json(), params_);
}

Generator Generator::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "generator") throw Error("checkpoint '" + path + "' is not a generator");
  Generator g(GeneratorConfig::from_json(ckpt.config));
  restore_params(g.params_, ckpt);
  return g;
}

}  // namespace f2r

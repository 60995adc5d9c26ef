#include "f2r/discriminator.hpp"

#include <cmath>
#include <fstream>

namespace f2r {

void DiscriminatorConfig::validate() const {
  if (layers < 1) throw Error("discriminator: layers must be >= 1");
  if (heads < 1) throw Error("discriminator: heads must be >= 1");
  if (token_dim != hidden || pos_dim != hidden) {
    throw Error("discriminator: token/positional embedding sizes must equal the hidden size");
  }
  if (hidden % heads != 0) throw Error("discriminator: heads must divide the hidden size");
  if (vocab_size < 1) throw Error("discriminator: vocab_size must be set");
  if (max_positions < 2) throw Error("discriminator: max_positions must be >= 2");
}

nlohmann::json DiscriminatorConfig::to_json() const {
  return {{"layers", layers},
          {"heads", heads},
          {"token_dim", token_dim},
          {"style_dim", style_dim},
          {"pos_dim", pos_dim},
          {"hidden", hidden},
          {"vocab_size", vocab_size},
          {"max_positions", max_positions},
          {"init_std", init_std},
          {"use_history", use_history}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.token_dim = j.value("token_dim", c.token_dim);
  c.style_dim = j.value("style_dim", c.style_dim);
  c.pos_dim = j.value("pos_dim", c.pos_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.init_std = j.value("init_std", c.init_std);
  c.use_history = j.value("use_history", c.use_history);
  return c;
}

Discriminator::Discriminator(const DiscriminatorConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  dims_ = nn::StackDims{config_.layers, config_.heads, config_.hidden, config_.ffn_dim()};
  Rng rng = derive_rng(seed, "discriminator-init");
  params_.normal("tok_emb", config_.vocab_size, config_.hidden, 0.1, rng);
  params_.normal("cls", 1, config_.hidden, 0.1, rng);
  params_.normal("pos", config_.max_positions, config_.hidden, 0.05, rng);
  nn::create_encoder_stack(params_, "enc", dims_, config_.init_std, rng);
  params_.normal("head.w", config_.hidden, 2, config_.init_std, rng);
  params_.zeros("head.b", 1, 2);
}

ad::Var Discriminator::logits(ad::Tape& tape, const TapeBinding& p, const SeqInput& x,
                              const std::vector<int>& history, nn::AttentionTrace* trace) const {
  std::vector<ad::Var> parts;
  parts.push_back(p["cls"]);
  if (config_.use_history && !history.empty()) {
    std::vector<int> hist = history;
    hist.push_back(Vocab::kRes);
    parts.push_back(tape.gather_rows(p["tok_emb"], hist));
  }
  if (std::holds_alternative<std::vector<int>>(x)) {
    const auto& ids = std::get<std::vector<int>>(x);
    if (ids.empty()) throw Error("discriminator: empty input");
    parts.push_back(tape.gather_rows(p["tok_emb"], ids));
  } else {
    const ad::Var probs = std::get<SoftInput>(x).probs;
    if (tape.value(probs).rows() == 0) throw Error("discriminator: empty input");
    parts.push_back(tape.matmul(probs, p["tok_emb"]));
  }
  ad::Var emb = tape.concat_rows(parts);

  const int total = static_cast<int>(tape.value(emb).rows());
  if (total > config_.max_positions) {
    throw Error("discriminator: input length " + std::to_string(total) +
                " exceeds positional capacity " + std::to_string(config_.max_positions));
  }
  emb = tape.add(emb, tape.slice_rows(p["pos"], 0, total));

  // The pooling query never attends to itself, so its attention rows are
  // distributions over the content tokens alone.
  ad::Matrix mask = ad::Matrix::Zero(total, total);
  mask(0, 0) = -1e30;

  ad::Var h = nn::encoder_stack(tape, p, "enc", dims_, emb, mask, trace);
  ad::Var pooled = tape.slice_rows(h, 0, 1);
  return tape.add_rowwise(tape.matmul(pooled, p["head.w"]), p["head.b"]);
}

StylePrediction Discriminator::classify_input(const SeqInput& x,
                                              const std::vector<int>& history) const {
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  ad::Var lg = logits(tape, p, x, history);
  ad::Var probs = tape.softmax_rows(lg);
  StylePrediction pred;
  pred.probs[0] = tape.value(probs)(0, 0);
  pred.probs[1] = tape.value(probs)(0, 1);
  pred.predicted = pred.probs[1] > pred.probs[0] ? Style::kFeedback : Style::kNatural;
  return pred;
}

StylePrediction Discriminator::classify(const std::vector<int>& x,
                                        const std::vector<int>& history) const {
  return classify_input(x, history);
}

StylePrediction Discriminator::classify(const SoftSequence& x,
                                        const std::vector<int>& history) const {
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  ad::Var probs_leaf = tape.leaf(x.probs, /*requires_grad=*/false);
  ad::Var lg = logits(tape, p, SoftInput{probs_leaf}, history);
  ad::Var probs = tape.softmax_rows(lg);
  StylePrediction pred;
  pred.probs[0] = tape.value(probs)(0, 0);
  pred.probs[1] = tape.value(probs)(0, 1);
  pred.predicted = pred.probs[1] > pred.probs[0] ? Style::kFeedback : Style::kNatural;
  return pred;
}

AttentionMaps Discriminator::attention_maps(const std::vector<int>& x,
                                            const std::vector<int>& history,
                                            const Vocab& vocab) const {
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  nn::AttentionTrace trace;
  (void)logits(tape, p, x, history, &trace);

  AttentionMaps maps;
  if (config_.use_history && !history.empty()) {
    for (int id : history) maps.tokens.push_back(vocab.token(id));
    maps.tokens.push_back(vocab.token(Vocab::kRes));
  }
  for (int id : x) maps.tokens.push_back(vocab.token(id));

  for (const auto& layer : trace.layers) {
    std::vector<std::vector<double>> heads;
    for (const ad::Matrix& attn : layer) {
      // Row 0 is the pooling query; column 0 (its own slot) is masked to ~0.
      std::vector<double> row;
      for (Eigen::Index c = 1; c < attn.cols(); ++c) row.push_back(attn(0, c));
      heads.push_back(std::move(row));
    }
    maps.layers.push_back(std::move(heads));
  }
  return maps;
}

void Discriminator::save(const std::string& path) const {
  save_checkpoint(path, "discriminator", config_.to_json(), params_);
}

Discriminator Discriminator::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "discriminator") throw Error("checkpoint '" + path + "' is not a discriminator");
  Discriminator d(DiscriminatorConfig::from_json(ckpt.config));
  restore_params(d.params_, ckpt);
  return d;
}

void export_attention(const Discriminator& disc, const std::vector<int>& x,
                      const std::vector<int>& history, const Vocab& vocab,
                      const std::string& out_path) {
  const AttentionMaps maps = disc.attention_maps(x, history, vocab);
  nlohmann::json j;
  j["tokens"] = maps.tokens;
  j["layers"] = maps.layers;
  std::ofstream os(out_path, std::ios::trunc);
  if (!os) throw Error("export_attention: cannot open '" + out_path + "' for writing");
  os << j.dump(2) << "\n";
  if (!os) throw Error("export_attention: write failed for '" + out_path + "'");
}

}  // namespace f2r

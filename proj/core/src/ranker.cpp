#include "f2r/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "f2r/losses.hpp"
#include "f2r/optim.hpp"

namespace f2r {

using nlohmann::json;

RankerArch ranker_arch_from_string(const std::string& name) {
  if (name == "bi" || name == "BI") return RankerArch::kBi;
  if (name == "poly" || name == "POLY") return RankerArch::kPoly;
  throw Error("unknown ranker architecture '" + name + "' (expected bi|poly)");
}

std::string ranker_arch_to_string(RankerArch arch) {
  return arch == RankerArch::kBi ? "bi" : "poly";
}

void RankerConfig::validate() const {
  if (layers < 1) throw Error("ranker: layers must be >= 1");
  if (heads < 1 || dim % heads != 0) throw Error("ranker: heads must divide dim");
  if (codes < 1) throw Error("ranker: codes must be >= 1");
  if (arch == RankerArch::kBi && codes != 1) throw Error("ranker: bi-encoder uses exactly 1 code");
  if (vocab_size < 1) throw Error("ranker: vocab_size must be set");
  if (max_positions < 1) throw Error("ranker: max_positions must be >= 1");
}

json RankerConfig::to_json() const {
  return {{"arch", ranker_arch_to_string(arch)}, {"layers", layers},       {"heads", heads},
          {"dim", dim},                          {"codes", codes},         {"vocab_size", vocab_size},
          {"max_positions", max_positions},      {"init_std", init_std}};
}

RankerConfig RankerConfig::from_json(const json& j) {
  RankerConfig c;
  if (j.contains("arch")) c.arch = ranker_arch_from_string(j["arch"].get<std::string>());
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.dim = j.value("dim", c.dim);
  c.codes = j.value("codes", c.codes);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.init_std = j.value("init_std", c.init_std);
  return c;
}

Ranker::Ranker(const RankerConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  dims_ = nn::StackDims{config_.layers, config_.heads, config_.dim, config_.ffn_dim()};
  Rng rng = derive_rng(seed, "ranker-init");
  for (const char* side : {"ctx", "cand"}) {
    const std::string s(side);
    params_.normal(s + ".tok_emb", config_.vocab_size, config_.dim, 0.1, rng);
    params_.normal(s + ".pos", config_.max_positions, config_.dim, 0.05, rng);
    nn::create_encoder_stack(params_, s + ".enc", dims_, config_.init_std, rng);
  }
  params_.normal("codes", config_.codes, config_.dim, 0.1, rng);
  params_.normal("cand_query", 1, config_.dim, 0.1, rng);
}

ad::Var Ranker::encode_tokens(ad::Tape& tape, const TapeBinding& p, const std::string& side,
                              const std::vector<int>& ids) const {
  if (ids.empty()) throw Error("ranker: empty input");
  if (static_cast<int>(ids.size()) > config_.max_positions) {
    throw Error("ranker: input length " + std::to_string(ids.size()) +
                " exceeds positional capacity " + std::to_string(config_.max_positions));
  }
  ad::Var emb = tape.gather_rows(p[side + ".tok_emb"], ids);
  emb = tape.add(emb, tape.slice_rows(p[side + ".pos"], 0, static_cast<int>(ids.size())));
  return nn::encoder_stack(tape, p, side + ".enc", dims_, emb);
}

ad::Var Ranker::context_codes(ad::Tape& tape, const TapeBinding& p,
                              const std::vector<int>& context) const {
  ad::Var h = encode_tokens(tape, p, "ctx", context);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  ad::Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(p["codes"], h), inv_sqrt));
  return tape.matmul(attn, h);
}

ad::Var Ranker::candidate_vector(ad::Tape& tape, const TapeBinding& p,
                                 const std::vector<int>& candidate) const {
  ad::Var h = encode_tokens(tape, p, "cand", candidate);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.dim));
  ad::Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(p["cand_query"], h), inv_sqrt));
  return tape.matmul(attn, h);
}

ad::Var Ranker::pair_score(ad::Tape& tape, ad::Var codes, ad::Var candidate) const {
  // Candidate-conditioned attention over the context codes; with a single
  // code the softmax is trivially 1 and this is the bi-encoder dot product.
  ad::Var w = tape.softmax_rows(tape.matmul_nt(candidate, codes));
  ad::Var ctx = tape.matmul(w, codes);
  return tape.matmul_nt(ctx, candidate);
}

double Ranker::score_bi(const std::vector<int>& context, const std::vector<int>& candidate) const {
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  // The first context code is the bi-encoder's summary vector.
  ad::Var codes = context_codes(tape, p, context);
  ad::Var first = tape.slice_rows(codes, 0, 1);
  ad::Var cand = candidate_vector(tape, p, candidate);
  return tape.value(tape.matmul_nt(first, cand))(0, 0);
}

std::vector<double> Ranker::score_poly(const std::vector<int>& context,
                                       const std::vector<std::vector<int>>& candidates) const {
  if (candidates.empty()) throw Error("ranker: no candidates");
  ad::Tape tape;
  TapeBinding p(tape, static_cast<const ParamStore&>(params_));
  ad::Var codes = context_codes(tape, p, context);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& cand : candidates) {
    ad::Var e = candidate_vector(tape, p, cand);
    out.push_back(tape.value(pair_score(tape, codes, e))(0, 0));
  }
  return out;
}

std::vector<double> Ranker::score(const std::vector<int>& context,
                                  const std::vector<std::vector<int>>& candidates) const {
  if (config_.arch == RankerArch::kPoly) return score_poly(context, candidates);
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& cand : candidates) out.push_back(score_bi(context, cand));
  return out;
}

void Ranker::save(const std::string& path) const {
  save_checkpoint(path, "ranker", config_.to_json(), params_);
}

Ranker Ranker::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "ranker") throw Error("checkpoint '" + path + "' is not a ranker");
  Ranker r(RankerConfig::from_json(ckpt.config));
  restore_params(r.params_, ckpt);
  return r;
}

double hits_at_k(const Scorer& scorer, const std::vector<RankingExample>& examples, int k) {
  if (k < 1) throw Error("hits_at_k: k must be >= 1");
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    const std::vector<double> scores = scorer(ex);
    if (scores.size() != ex.candidates.size()) {
      throw Error("hits_at_k: scorer returned wrong number of scores");
    }
    const double correct = scores[static_cast<std::size_t>(ex.correct_index)];
    int rank = 0;  // candidates strictly ahead of the correct one
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (static_cast<int>(j) == ex.correct_index) continue;
      if (scores[j] > correct ||
          (scores[j] == correct && static_cast<int>(j) < ex.correct_index)) {
        ++rank;
      }
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

Scorer make_ranker_scorer(const Ranker& ranker, const Vocab& vocab) {
  return [&ranker, &vocab](const RankingExample& ex) {
    const std::vector<int> ctx = vocab.encode(ex.context);
    std::vector<std::vector<int>> cands;
    cands.reserve(ex.candidates.size());
    for (const auto& c : ex.candidates) cands.push_back(vocab.encode(c));
    return ranker.score(ctx, cands);
  };
}

void RankerTrainConfig::validate() const {
  if (lr <= 0) throw Error("ranker training: lr must be positive");
  if (batch_size < 2) throw Error("ranker training: batch_size must be >= 2 for negatives");
  if (steps < 0) throw Error("ranker training: steps must be >= 0");
}

std::vector<RankingPair> load_ranking_pairs_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<RankingPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
      out.push_back(RankingPair{rec.at("context").get<std::string>(),
                                rec.at("response").get<std::string>()});
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, std::string("bad pair record: ") + e.what());
    }
  }
  if (out.empty()) throw Error("'" + path + "' contains no records");
  return out;
}

void save_ranking_pairs_jsonl(const std::string& path, const std::vector<RankingPair>& pairs) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& p : pairs) {
    os << json{{"context", p.context}, {"response", p.response}}.dump() << "\n";
  }
}

namespace {

std::vector<int> encode_capped(const Vocab& vocab, const std::string& text, int cap,
                               bool keep_tail) {
  std::vector<int> ids = vocab.encode(text);
  if (static_cast<int>(ids.size()) > cap) {
    if (keep_tail) {
      ids.erase(ids.begin(), ids.end() - cap);
    } else {
      ids.resize(static_cast<std::size_t>(cap));
    }
  }
  if (ids.empty()) ids.push_back(Vocab::kUnk);
  return ids;
}

}  // namespace

double train_ranker(Ranker& ranker, const Vocab& vocab, const std::vector<RankingPair>& pairs,
                    const RankerTrainConfig& config) {
  config.validate();
  if (config.steps == 0) return 0.0;
  if (pairs.size() < 2) throw Error("train_ranker: need at least two pairs");

  const int cap = ranker.config().max_positions;
  struct Encoded {
    std::vector<int> ctx, resp;
  };
  std::vector<Encoded> data;
  data.reserve(pairs.size());
  for (const auto& p : pairs) {
    data.push_back(Encoded{encode_capped(vocab, p.context, cap, /*keep_tail=*/true),
                           encode_capped(vocab, p.response, cap, /*keep_tail=*/false)});
  }

  Rng rng = derive_rng(config.seed, "train-ranker");
  Adamax opt(config.lr);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  double last_loss = 0.0;
  for (int step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> batch;
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    ad::Tape tape;
    TapeBinding p(tape, ranker.params());
    std::vector<ad::Var> code_rows, cand_rows;
    for (std::size_t idx : batch) {
      code_rows.push_back(ranker.context_codes(tape, p, data[idx].ctx));
      cand_rows.push_back(ranker.candidate_vector(tape, p, data[idx].resp));
    }

    // Score matrix: row i = context i against every gold candidate in batch.
    std::vector<ad::Var> rows;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::vector<ad::Var> cells;
      for (std::size_t j = 0; j < batch.size(); ++j) {
        cells.push_back(ranker.pair_score(tape, code_rows[i], cand_rows[j]));
      }
      rows.push_back(tape.concat_cols(cells));
    }
    ad::Var scores = tape.concat_rows(rows);
    ad::Var ls = tape.log_softmax_rows(scores);
    std::vector<std::pair<int, int>> diag;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      diag.emplace_back(static_cast<int>(i), static_cast<int>(i));
    }
    ad::Var loss = tape.scale(tape.sum(tape.gather_coeffs(ls, std::move(diag))),
                              -1.0 / static_cast<double>(batch.size()));
    last_loss = tape.value(loss)(0, 0);
    if (!std::isfinite(last_loss)) {
      throw Error("train_ranker: non-finite loss at step " + std::to_string(step));
    }

    ranker.params().zero_grads();
    tape.backward(loss);
    p.flush();
    ranker.params().clip_grads(config.grad_clip);
    opt.step(ranker.params());
    ranker.params().zero_grads();
  }
  return last_loss;
}

double train_ranker_provided(Ranker& ranker, const Vocab& vocab,
                             const std::vector<RankingExample>& examples,
                             const RankerTrainConfig& config) {
  config.validate();
  if (config.steps == 0) return 0.0;
  if (examples.empty()) throw Error("train_ranker: empty corpus");

  const int cap = ranker.config().max_positions;
  Rng rng = derive_rng(config.seed, "train-ranker");
  Adamax opt(config.lr);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  double last_loss = 0.0;
  for (int step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> batch;
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    ad::Tape tape;
    TapeBinding p(tape, ranker.params());
    double batch_loss = 0.0;
    std::vector<ad::Var> losses;
    for (std::size_t idx : batch) {
      const RankingExample& ex = examples[idx];
      ad::Var codes = ranker.context_codes(
          tape, p, encode_capped(vocab, ex.context, cap, /*keep_tail=*/true));
      std::vector<ad::Var> cells;
      for (const auto& cand : ex.candidates) {
        ad::Var e = ranker.candidate_vector(tape, p,
                                            encode_capped(vocab, cand, cap, /*keep_tail=*/false));
        cells.push_back(ranker.pair_score(tape, codes, e));
      }
      ad::Var ls = tape.log_softmax_rows(tape.concat_cols(cells));
      losses.push_back(tape.scale(tape.gather_coeffs(ls, {{0, ex.correct_index}}), -1.0));
    }
    ad::Var loss = tape.scale(tape.sum(tape.concat_rows(losses)),
                              1.0 / static_cast<double>(losses.size()));
    batch_loss = tape.value(loss)(0, 0);
    if (!std::isfinite(batch_loss)) {
      throw Error("train_ranker: non-finite loss at step " + std::to_string(step));
    }
    last_loss = batch_loss;

    ranker.params().zero_grads();
    tape.backward(loss);
    p.flush();
    ranker.params().clip_grads(config.grad_clip);
    opt.step(ranker.params());
    ranker.params().zero_grads();
  }
  return last_loss;
}

}  // namespace f2r

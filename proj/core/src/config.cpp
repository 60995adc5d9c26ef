#include "f2r/config.hpp"

#include <fstream>

namespace f2r {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& section) {
  if (!j.is_object()) throw Error("config: section '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw Error("config: unknown key '" + section + "." + it.key() + "'");
  }
}

StyleLossForm style_form_from_string(const std::string& s) {
  if (s == "log") return StyleLossForm::kNegLog;
  if (s == "literal") return StyleLossForm::kLiteral;
  throw Error("config: style_form must be 'log' or 'literal', got '" + s + "'");
}

std::string style_form_to_string(StyleLossForm f) {
  return f == StyleLossForm::kNegLog ? "log" : "literal";
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["n_turns"] = n_turns;
  j["caps"] = {{"max_history_tokens", caps.max_history_tokens},
               {"max_response_tokens", caps.max_response_tokens}};
  j["vocab"] = {{"max_size", vocab_max_size}, {"min_count", vocab_min_count}};
  j["generator"] = generator.to_json();
  j["discriminator"] = discriminator.to_json();
  j["pretrain"] = {{"epochs", pretrain.epochs},
                   {"lr", pretrain.lr},
                   {"weight_decay", pretrain.weight_decay},
                   {"mask_prob", pretrain.mask_prob},
                   {"shuffle_prob", pretrain.shuffle_prob},
                   {"batch_size", pretrain.batch_size},
                   {"grad_clip", pretrain.grad_clip}};
  j["f2r_training"] = {{"gen_lr", training.gen_lr},
                       {"disc_lr", training.disc_lr},
                       {"gen_weight_decay", training.gen_weight_decay},
                       {"disc_weight_decay", training.disc_weight_decay},
                       {"weight_self", training.weights.self_rec},
                       {"weight_cycle", training.weights.cycle},
                       {"weight_style", training.weights.style},
                       {"batch_size", training.batch_size},
                       {"steps", training.steps},
                       {"disc_steps_per_gen", training.disc_steps_per_gen},
                       {"style_eps", training.style_eps},
                       {"style_form", style_form_to_string(training.style_form)},
                       {"max_len", training.max_len},
                       {"repetition_penalty", training.repetition_penalty},
                       {"grad_clip", training.grad_clip},
                       {"log_every", training.log_every},
                       {"eval_every", training.eval_every},
                       {"eval_examples", training.eval_examples},
                       {"checkpoint_every", training.checkpoint_every}};
  j["ranker"] = ranker.to_json();
  j["ranker_training"] = {{"lr", ranker_training.lr},
                          {"batch_size", ranker_training.batch_size},
                          {"steps", ranker_training.steps},
                          {"in_batch_negatives", ranker_training.in_batch_negatives},
                          {"grad_clip", ranker_training.grad_clip}};
  j["synthetic"] = {{"pairs_per_class", synthetic.pairs_per_class},
                    {"include_uncovered", synthetic.include_uncovered},
                    {"split", {synthetic.split.train, synthetic.split.valid,
                               synthetic.split.test}}};
  j["experiment"] = {{"setting", setting_to_string(experiment.setting)},
                     {"seeds", experiment.seeds},
                     {"max_len", experiment.max_len},
                     {"repetition_penalty", experiment.repetition_penalty}};
  return j;
}

std::string RunConfig::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(to_json().dump())));
  return std::string(buf);
}

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, {"seed", "n_turns", "caps", "vocab", "generator", "discriminator", "pretrain",
                 "f2r_training", "ranker", "ranker_training", "synthetic", "experiment"},
             "<root>");
  RunConfig c;
  c.seed = j.value("seed", c.seed);
  c.n_turns = j.value("n_turns", c.n_turns);
  if (j.contains("caps")) {
    check_keys(j["caps"], {"max_history_tokens", "max_response_tokens"}, "caps");
    c.caps.max_history_tokens = j["caps"].value("max_history_tokens", c.caps.max_history_tokens);
    c.caps.max_response_tokens =
        j["caps"].value("max_response_tokens", c.caps.max_response_tokens);
  }
  if (j.contains("vocab")) {
    check_keys(j["vocab"], {"max_size", "min_count"}, "vocab");
    c.vocab_max_size = j["vocab"].value("max_size", c.vocab_max_size);
    c.vocab_min_count = j["vocab"].value("min_count", c.vocab_min_count);
  }
  if (j.contains("generator")) {
    check_keys(j["generator"],
               {"encoder_layers", "decoder_layers", "heads", "token_dim", "style_dim", "pos_dim",
                "hidden", "vocab_size", "max_positions", "init_std"},
               "generator");
    c.generator = GeneratorConfig::from_json(j["generator"]);
  }
  if (j.contains("discriminator")) {
    check_keys(j["discriminator"],
               {"layers", "heads", "token_dim", "style_dim", "pos_dim", "hidden", "vocab_size",
                "max_positions", "init_std", "use_history"},
               "discriminator");
    c.discriminator = DiscriminatorConfig::from_json(j["discriminator"]);
  }
  if (j.contains("pretrain")) {
    const auto& p = j["pretrain"];
    check_keys(p, {"epochs", "lr", "weight_decay", "mask_prob", "shuffle_prob", "batch_size",
                   "grad_clip"},
               "pretrain");
    c.pretrain.epochs = p.value("epochs", c.pretrain.epochs);
    c.pretrain.lr = p.value("lr", c.pretrain.lr);
    c.pretrain.weight_decay = p.value("weight_decay", c.pretrain.weight_decay);
    c.pretrain.mask_prob = p.value("mask_prob", c.pretrain.mask_prob);
    c.pretrain.shuffle_prob = p.value("shuffle_prob", c.pretrain.shuffle_prob);
    c.pretrain.batch_size = p.value("batch_size", c.pretrain.batch_size);
    c.pretrain.grad_clip = p.value("grad_clip", c.pretrain.grad_clip);
  }
  if (j.contains("f2r_training")) {
    const auto& t = j["f2r_training"];
    check_keys(t,
               {"gen_lr", "disc_lr", "gen_weight_decay", "disc_weight_decay", "weight_self",
                "weight_cycle", "weight_style", "batch_size", "steps", "disc_steps_per_gen",
                "style_eps", "style_form", "max_len", "repetition_penalty", "grad_clip",
                "log_every", "eval_every", "eval_examples", "checkpoint_every"},
               "f2r_training");
    c.training.gen_lr = t.value("gen_lr", c.training.gen_lr);
    c.training.disc_lr = t.value("disc_lr", c.training.disc_lr);
    c.training.gen_weight_decay = t.value("gen_weight_decay", c.training.gen_weight_decay);
    c.training.disc_weight_decay = t.value("disc_weight_decay", c.training.disc_weight_decay);
    c.training.weights.self_rec = t.value("weight_self", c.training.weights.self_rec);
    c.training.weights.cycle = t.value("weight_cycle", c.training.weights.cycle);
    c.training.weights.style = t.value("weight_style", c.training.weights.style);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.steps = t.value("steps", c.training.steps);
    c.training.disc_steps_per_gen = t.value("disc_steps_per_gen", c.training.disc_steps_per_gen);
    c.training.style_eps = t.value("style_eps", c.training.style_eps);
    if (t.contains("style_form")) {
      c.training.style_form = style_form_from_string(t["style_form"].get<std::string>());
    }
    c.training.max_len = t.value("max_len", c.training.max_len);
    c.training.repetition_penalty = t.value("repetition_penalty", c.training.repetition_penalty);
    c.training.grad_clip = t.value("grad_clip", c.training.grad_clip);
    c.training.log_every = t.value("log_every", c.training.log_every);
    c.training.eval_every = t.value("eval_every", c.training.eval_every);
    c.training.eval_examples = t.value("eval_examples", c.training.eval_examples);
    c.training.checkpoint_every = t.value("checkpoint_every", c.training.checkpoint_every);
  }
  if (j.contains("ranker")) {
    check_keys(j["ranker"],
               {"arch", "layers", "heads", "dim", "codes", "vocab_size", "max_positions",
                "init_std"},
               "ranker");
    c.ranker = RankerConfig::from_json(j["ranker"]);
  }
  if (j.contains("ranker_training")) {
    const auto& t = j["ranker_training"];
    check_keys(t, {"lr", "batch_size", "steps", "in_batch_negatives", "grad_clip"},
               "ranker_training");
    c.ranker_training.lr = t.value("lr", c.ranker_training.lr);
    c.ranker_training.batch_size = t.value("batch_size", c.ranker_training.batch_size);
    c.ranker_training.steps = t.value("steps", c.ranker_training.steps);
    c.ranker_training.in_batch_negatives =
        t.value("in_batch_negatives", c.ranker_training.in_batch_negatives);
    c.ranker_training.grad_clip = t.value("grad_clip", c.ranker_training.grad_clip);
  }
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    check_keys(s, {"pairs_per_class", "include_uncovered", "split"}, "synthetic");
    c.synthetic.pairs_per_class = s.value("pairs_per_class", c.synthetic.pairs_per_class);
    c.synthetic.include_uncovered = s.value("include_uncovered", c.synthetic.include_uncovered);
    if (s.contains("split")) {
      const auto ratios = s["split"].get<std::vector<double>>();
      if (ratios.size() != 3) throw Error("config: synthetic.split needs 3 ratios");
      c.synthetic.split.train = ratios[0];
      c.synthetic.split.valid = ratios[1];
      c.synthetic.split.test = ratios[2];
    }
  }
  if (j.contains("experiment")) {
    const auto& e = j["experiment"];
    check_keys(e, {"setting", "seeds", "max_len", "repetition_penalty"}, "experiment");
    if (e.contains("setting")) {
      c.experiment.setting = setting_from_string(e["setting"].get<std::string>());
    }
    if (e.contains("seeds")) {
      c.experiment.seeds = e["seeds"].get<std::vector<std::uint64_t>>();
    }
    c.experiment.max_len = e.value("max_len", c.experiment.max_len);
    c.experiment.repetition_penalty =
        e.value("repetition_penalty", c.experiment.repetition_penalty);
  }
  // Derived wiring: the experiment reuses the ranker sections and caps.
  c.experiment.n_turns = c.n_turns;
  c.experiment.ranker = c.ranker;
  c.experiment.ranker_train = c.ranker_training;
  c.experiment.caps = c.caps;
  // Sub-seeds follow the run seed unless a section pinned its own.
  c.pretrain.seed = c.seed;
  c.training.seed = c.seed;
  c.ranker_training.seed = c.seed;
  c.synthetic.seed = c.seed;
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("config: cannot open '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw Error("config: bad JSON in '" + path + "': " + e.what());
  }
  return from_json(j);
}

RunConfig desk_scale_config() {
  RunConfig c;
  c.generator.encoder_layers = 2;
  c.generator.decoder_layers = 2;
  c.generator.heads = 4;
  c.generator.token_dim = c.generator.style_dim = c.generator.pos_dim = c.generator.hidden = 64;
  c.generator.max_positions = 96;
  c.discriminator.layers = 2;
  c.discriminator.heads = 4;
  c.discriminator.token_dim = c.discriminator.style_dim = c.discriminator.pos_dim =
      c.discriminator.hidden = 64;
  c.discriminator.max_positions = 96;
  c.ranker.layers = 2;
  c.ranker.heads = 2;
  c.ranker.dim = 64;
  c.training.max_len = 16;
  c.experiment.max_len = 16;
  return c;
}

}  // namespace f2r

// f2r: feedback-to-response style transfer toolkit.
//
// Subcommands: ingest, convert, train-f2r, train-ranker, evaluate,
// run-experiment, export-attention, make-synthetic. Every run writes a
// manifest (config hash, seed, inputs, outputs) beside its outputs, and all
// randomness funnels through --seed.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "f2r/config.hpp"
#include "f2r/discriminator.hpp"
#include "f2r/experiments.hpp"
#include "f2r/generator.hpp"
#include "f2r/heuristic.hpp"
#include "f2r/loaders.hpp"
#include "f2r/manifest.hpp"
#include "f2r/ranker.hpp"
#include "f2r/synthetic.hpp"
#include "f2r/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

f2r::RunConfig load_config(const CommonArgs& args) {
  f2r::RunConfig cfg = args.config_path.empty() ? f2r::desk_scale_config()
                                                : f2r::RunConfig::from_file(args.config_path);
  if (args.seed) {
    json j = cfg.to_json();
    j["seed"] = *args.seed;
    cfg = f2r::RunConfig::from_json(j);
  }
  return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", args.seed, "seed for all randomness in this run");
}

void ensure_dir(const std::string& path) { fs::create_directories(path); }

f2r::Vocab build_vocab_from_corpus(const f2r::StyleCorpus& corpus, int n_turns,
                                   std::size_t max_size, std::size_t min_count) {
  std::vector<std::string> texts;
  auto collect = [&](const std::vector<f2r::StyleTransferExample>& xs) {
    for (const auto& ex : xs) {
      texts.push_back(f2r::assemble_history(ex.history, n_turns));
      texts.push_back(ex.response);
    }
  };
  collect(corpus.train);
  collect(corpus.valid);
  collect(corpus.test);
  return f2r::Vocab::build(texts, max_size, min_count);
}

f2r::StyleCorpus load_style_corpus_dir(const std::string& dir) {
  f2r::StyleCorpus corpus;
  corpus.train = f2r::load_style_examples_jsonl(dir + "/train.jsonl");
  corpus.valid = f2r::load_style_examples_jsonl(dir + "/valid.jsonl");
  corpus.test = f2r::load_style_examples_jsonl(dir + "/test.jsonl");
  return corpus;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw f2r::Error("cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  CommonArgs common;
  std::string in, out, format = "jsonl";
  std::optional<int> style;
};

void run_ingest(const IngestArgs& a) {
  const f2r::RunConfig cfg = load_config(a.common);
  std::optional<f2r::Style> default_style;
  if (a.style) default_style = f2r::style_from_int(*a.style);
  const auto convs =
      f2r::load_dialogue_corpus(a.in, f2r::corpus_format_from_string(a.format), default_style);
  f2r::save_conversations_jsonl(a.out, convs);
  f2r::write_manifest(f2r::manifest_path_for(a.out, false),
                      f2r::make_manifest("ingest", cfg.config_hash(), cfg.seed, {a.in}, {a.out}));
  std::cout << json{{"records", convs.size()}, {"out", a.out}}.dump() << "\n";
}

// ---------------------------------------------------------------------------
// convert

struct ConvertArgs {
  CommonArgs common;
  std::string mode, in, out, ckpt, vocab;
};

void run_convert(const ConvertArgs& a) {
  const f2r::RunConfig cfg = load_config(a.common);
  const auto convs =
      f2r::load_dialogue_corpus(a.in, f2r::CorpusFormat::kJsonl, f2r::Style::kFeedback);

  std::optional<f2r::Generator> gen;
  std::optional<f2r::Vocab> vocab;
  if (a.mode == "f2r") {
    if (a.ckpt.empty()) throw f2r::Error("convert --mode f2r needs --ckpt");
    if (a.vocab.empty()) throw f2r::Error("convert --mode f2r needs --vocab");
    gen = f2r::Generator::load(a.ckpt);
    vocab = f2r::Vocab::load(a.vocab);
  } else if (a.mode != "heuristic") {
    throw f2r::Error("convert: --mode must be heuristic or f2r");
  }

  std::ofstream os(a.out, std::ios::trunc);
  if (!os) throw f2r::Error("cannot open '" + a.out + "' for writing");
  for (const auto& conv : convs) {
    std::string converted;
    if (a.mode == "heuristic") {
      converted = f2r::heuristic_convert(conv.final_response);
    } else {
      f2r::StyleTransferExample ex{conv.turns, conv.final_response, conv.style};
      converted = f2r::convert_with_generator(*gen, *vocab, ex, cfg.n_turns,
                                              cfg.experiment.max_len,
                                              cfg.experiment.repetition_penalty, cfg.caps);
    }
    json turns = json::array();
    for (const auto& t : conv.turns) {
      turns.push_back({{"speaker", t.speaker == f2r::Speaker::kHuman ? "human" : "bot"},
                       {"text", t.text}});
    }
    os << json{{"turns", turns},
               {"response", conv.final_response},
               {"style", f2r::style_value(conv.style)},
               {"converted", converted}}
              .dump()
       << "\n";
  }
  os.close();
  std::vector<std::string> inputs = {a.in};
  if (!a.ckpt.empty()) inputs.push_back(a.ckpt);
  f2r::write_manifest(f2r::manifest_path_for(a.out, false),
                      f2r::make_manifest("convert", cfg.config_hash(), cfg.seed, inputs, {a.out}));
  std::cout << json{{"records", convs.size()}, {"out", a.out}}.dump() << "\n";
}

// ---------------------------------------------------------------------------
// make-synthetic

struct MakeSyntheticArgs {
  CommonArgs common;
  std::string out;
};

void run_make_synthetic(const MakeSyntheticArgs& a) {
  f2r::RunConfig cfg = load_config(a.common);
  cfg.synthetic.seed = cfg.seed;
  ensure_dir(a.out);

  const f2r::SyntheticCorpus corpus = f2r::make_synthetic_corpus(cfg.synthetic);
  f2r::save_style_examples_jsonl(a.out + "/train.jsonl", corpus.style.train);
  f2r::save_style_examples_jsonl(a.out + "/valid.jsonl", corpus.style.valid);
  f2r::save_style_examples_jsonl(a.out + "/test.jsonl", corpus.style.test);
  f2r::save_oracle_jsonl(a.out + "/oracle.jsonl", corpus);

  const f2r::Vocab vocab =
      build_vocab_from_corpus(corpus.style, cfg.n_turns, cfg.vocab_max_size, cfg.vocab_min_count);
  vocab.save(a.out + "/vocab.json");

  const auto dev = f2r::make_ranking_examples(corpus.style.valid, corpus.response_pool,
                                              cfg.n_turns, cfg.seed + 1);
  const auto test = f2r::make_ranking_examples(corpus.style.test, corpus.response_pool,
                                               cfg.n_turns, cfg.seed + 2);
  f2r::save_ranking_jsonl(a.out + "/ranking_dev.jsonl", dev);
  f2r::save_ranking_jsonl(a.out + "/ranking_test.jsonl", test);

  f2r::write_manifest(
      f2r::manifest_path_for(a.out, true),
      f2r::make_manifest("make-synthetic", cfg.config_hash(), cfg.seed, {},
                         {a.out + "/train.jsonl", a.out + "/valid.jsonl", a.out + "/test.jsonl",
                          a.out + "/oracle.jsonl", a.out + "/vocab.json",
                          a.out + "/ranking_dev.jsonl", a.out + "/ranking_test.jsonl"}));
  std::cout << json{{"train", corpus.style.train.size()},
                    {"valid", corpus.style.valid.size()},
                    {"test", corpus.style.test.size()},
                    {"vocab", vocab.size()},
                    {"out", a.out}}
                   .dump()
            << "\n";
}

// ---------------------------------------------------------------------------
// train-f2r

struct TrainF2rArgs {
  CommonArgs common;
  std::string data, out;
};

void run_train_f2r(const TrainF2rArgs& a) {
  f2r::RunConfig cfg = load_config(a.common);
  ensure_dir(a.out);

  const f2r::StyleCorpus corpus = load_style_corpus_dir(a.data);
  f2r::Vocab vocab = fs::exists(a.data + "/vocab.json")
                         ? f2r::Vocab::load(a.data + "/vocab.json")
                         : build_vocab_from_corpus(corpus, cfg.n_turns, cfg.vocab_max_size,
                                                   cfg.vocab_min_count);
  const f2r::EncodedCorpus encoded = f2r::encode_corpus(vocab, corpus, cfg.n_turns, cfg.caps);

  f2r::GeneratorConfig gcfg = cfg.generator;
  gcfg.vocab_size = vocab.size();
  f2r::DiscriminatorConfig dcfg = cfg.discriminator;
  dcfg.vocab_size = vocab.size();
  f2r::Generator gen(gcfg, cfg.seed);
  f2r::Discriminator disc(dcfg, cfg.seed);

  if (cfg.pretrain.epochs > 0) {
    const double nll = f2r::pretrain_generator(gen, encoded.train, cfg.pretrain);
    std::cout << json{{"pretrain_nll", nll}}.dump() << "\n";
  }

  f2r::TrainConfig tcfg = cfg.training;
  tcfg.checkpoint_dir = a.out;
  const f2r::TrainResult result = f2r::train_f2r(gen, disc, encoded, tcfg);

  gen.save(a.out + "/gen.ckpt");
  disc.save(a.out + "/disc.ckpt");
  vocab.save(a.out + "/vocab.json");
  f2r::write_history_csv(a.out + "/loss_history.csv", result.history);
  const json metrics = {{"disc_accuracy", result.final_disc_accuracy},
                        {"fooling_rate", result.final_fooling_rate},
                        {"seed", cfg.seed},
                        {"steps", cfg.training.steps}};
  write_json_file(a.out + "/metrics.json", metrics);

  f2r::write_manifest(
      f2r::manifest_path_for(a.out, true),
      f2r::make_manifest("train-f2r", cfg.config_hash(), cfg.seed,
                         {a.data + "/train.jsonl", a.data + "/valid.jsonl"},
                         {a.out + "/gen.ckpt", a.out + "/disc.ckpt", a.out + "/vocab.json",
                          a.out + "/loss_history.csv", a.out + "/metrics.json"}));
  std::cout << metrics.dump() << "\n";
}

// ---------------------------------------------------------------------------
// train-ranker

struct TrainRankerArgs {
  CommonArgs common;
  std::string in, vocab, out, eval;
};

void run_train_ranker(const TrainRankerArgs& a) {
  f2r::RunConfig cfg = load_config(a.common);
  const f2r::Vocab vocab = f2r::Vocab::load(a.vocab);
  const auto pairs = f2r::load_ranking_pairs_jsonl(a.in);

  f2r::RankerConfig rcfg = cfg.ranker;
  rcfg.vocab_size = vocab.size();
  f2r::Ranker ranker(rcfg, cfg.seed);
  const double final_loss = f2r::train_ranker(ranker, vocab, pairs, cfg.ranker_training);
  ranker.save(a.out);

  json metrics = {{"final_loss", final_loss}, {"pairs", pairs.size()}, {"seed", cfg.seed}};
  if (!a.eval.empty()) {
    const auto examples = f2r::load_ranking_jsonl(a.eval);
    metrics["hits@1/20"] = f2r::hits_at_k(f2r::make_ranker_scorer(ranker, vocab), examples, 1);
  }
  f2r::write_manifest(f2r::manifest_path_for(a.out, false),
                      f2r::make_manifest("train-ranker", cfg.config_hash(), cfg.seed,
                                         {a.in, a.vocab}, {a.out}));
  std::cout << metrics.dump() << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  CommonArgs common;
  std::string ckpt, data, vocab, out;
};

void run_evaluate(const EvaluateArgs& a) {
  const f2r::RunConfig cfg = load_config(a.common);
  const f2r::Ranker ranker = f2r::Ranker::load(a.ckpt);
  const f2r::Vocab vocab = f2r::Vocab::load(a.vocab);
  const auto examples = f2r::load_ranking_jsonl(a.data);
  const double hits = f2r::hits_at_k(f2r::make_ranker_scorer(ranker, vocab), examples, 1);

  const json metrics = {{"hits@1/20", hits}, {"n", examples.size()}, {"seed", cfg.seed}};
  if (!a.out.empty()) {
    write_json_file(a.out, metrics);
    f2r::write_manifest(f2r::manifest_path_for(a.out, false),
                        f2r::make_manifest("evaluate", cfg.config_hash(), cfg.seed,
                                           {a.ckpt, a.data, a.vocab}, {a.out}));
  }
  std::cout << metrics.dump() << "\n";
}

// ---------------------------------------------------------------------------
// run-experiment

struct RunExperimentArgs {
  CommonArgs common;
  std::string data, out, ckpt, setting;
};

void run_run_experiment(const RunExperimentArgs& a) {
  f2r::RunConfig cfg = load_config(a.common);
  ensure_dir(a.out);

  f2r::ExperimentData data;
  data.style = load_style_corpus_dir(a.data);
  data.vocab = f2r::Vocab::load(a.data + "/vocab.json");
  data.dev_eval = f2r::load_ranking_jsonl(a.data + "/ranking_dev.jsonl");
  data.test_eval = f2r::load_ranking_jsonl(a.data + "/ranking_test.jsonl");

  std::optional<f2r::Generator> converter;
  if (!a.ckpt.empty()) converter = f2r::Generator::load(a.ckpt);

  std::vector<f2r::Setting> settings;
  const std::string which = a.setting.empty() ? setting_to_string(cfg.experiment.setting)
                                              : a.setting;
  if (which == "ALL" || which == "all") {
    settings = {f2r::Setting::kNoFeedback, f2r::Setting::kFeedback, f2r::Setting::kHeuristic,
                f2r::Setting::kFeed2Resp};
  } else {
    settings = {f2r::setting_from_string(which)};
  }

  std::vector<f2r::SettingReport> reports;
  std::vector<std::string> outputs;
  for (f2r::Setting s : settings) {
    f2r::ExperimentSpec spec = cfg.experiment;
    spec.setting = s;
    const f2r::SettingReport report =
        f2r::run_setting(spec, data, converter ? &*converter : nullptr);
    const std::string path = a.out + "/report_" + report.setting + ".json";
    write_json_file(path, report.to_json());
    outputs.push_back(path);
    reports.push_back(report);
    std::cout << report.to_json().dump() << "\n";
  }
  f2r::write_reports_csv(a.out + "/reports.csv", reports);
  outputs.push_back(a.out + "/reports.csv");

  std::vector<std::string> inputs = {a.data};
  if (!a.ckpt.empty()) inputs.push_back(a.ckpt);
  f2r::write_manifest(f2r::manifest_path_for(a.out, true),
                      f2r::make_manifest("run-experiment", cfg.config_hash(), cfg.seed, inputs,
                                         outputs));
}

// ---------------------------------------------------------------------------
// export-attention

struct ExportAttentionArgs {
  CommonArgs common;
  std::string ckpt, vocab, in, out;
};

void run_export_attention(const ExportAttentionArgs& a) {
  const f2r::RunConfig cfg = load_config(a.common);
  const f2r::Discriminator disc = f2r::Discriminator::load(a.ckpt);
  const f2r::Vocab vocab = f2r::Vocab::load(a.vocab);
  const auto convs =
      f2r::load_dialogue_corpus(a.in, f2r::CorpusFormat::kJsonl, f2r::Style::kFeedback);
  ensure_dir(a.out);

  std::vector<std::string> outputs;
  int i = 0;
  for (const auto& conv : convs) {
    const std::vector<int> x = vocab.encode(conv.final_response);
    const std::vector<int> h = vocab.encode(f2r::assemble_history(conv.turns, cfg.n_turns));
    char name[64];
    std::snprintf(name, sizeof(name), "attention_%03d.json", i++);
    const std::string path = a.out + "/" + name;
    f2r::export_attention(disc, x, h, vocab, path);
    outputs.push_back(path);
  }
  f2r::write_manifest(f2r::manifest_path_for(a.out, true),
                      f2r::make_manifest("export-attention", cfg.config_hash(), cfg.seed,
                                         {a.ckpt, a.in}, outputs));
  std::cout << json{{"records", outputs.size()}, {"out", a.out}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feedback-to-response style transfer toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "normalize a raw corpus into canonical JSONL");
  add_common(s_ingest, ingest.common);
  s_ingest->add_option("--in", ingest.in, "input corpus")->required()->check(CLI::ExistingFile);
  s_ingest->add_option("--format", ingest.format, "jsonl|parlai");
  s_ingest->add_option("--style", ingest.style, "default style label (0|1) for the file");
  s_ingest->add_option("--out", ingest.out, "output JSONL")->required();
  s_ingest->callback([&]() { run_ingest(ingest); });

  ConvertArgs convert;
  auto* s_convert = app.add_subcommand("convert", "rewrite feedback into responses");
  add_common(s_convert, convert.common);
  s_convert->add_option("--mode", convert.mode, "heuristic|f2r")->required();
  s_convert->add_option("--in", convert.in, "feedback JSONL")->required()->check(CLI::ExistingFile);
  s_convert->add_option("--out", convert.out, "output JSONL")->required();
  s_convert->add_option("--ckpt", convert.ckpt, "generator checkpoint (f2r mode)");
  s_convert->add_option("--vocab", convert.vocab, "vocabulary file (f2r mode)");
  s_convert->callback([&]() { run_convert(convert); });

  MakeSyntheticArgs make_synth;
  auto* s_synth = app.add_subcommand("make-synthetic", "generate the templated verification corpus");
  add_common(s_synth, make_synth.common);
  s_synth->add_option("--out", make_synth.out, "output directory")->required();
  s_synth->callback([&]() { run_make_synthetic(make_synth); });

  TrainF2rArgs train_f2r;
  auto* s_trainf = app.add_subcommand("train-f2r", "adversarial converter training");
  add_common(s_trainf, train_f2r.common);
  s_trainf->add_option("--data", train_f2r.data, "corpus directory (train/valid/test.jsonl)")
      ->required()
      ->envname("F2R_DATA_DIR");
  s_trainf->add_option("--out", train_f2r.out, "output directory")->required();
  s_trainf->callback([&]() { run_train_f2r(train_f2r); });

  TrainRankerArgs train_ranker;
  auto* s_trainr = app.add_subcommand("train-ranker", "train a retrieval ranker");
  add_common(s_trainr, train_ranker.common);
  s_trainr->add_option("--in", train_ranker.in, "training pairs JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  s_trainr->add_option("--vocab", train_ranker.vocab, "vocabulary file")
      ->required()
      ->check(CLI::ExistingFile);
  s_trainr->add_option("--out", train_ranker.out, "output checkpoint path")->required();
  s_trainr->add_option("--eval", train_ranker.eval, "optional ranking JSONL to score");
  s_trainr->callback([&]() { run_train_ranker(train_ranker); });

  EvaluateArgs evaluate;
  auto* s_eval = app.add_subcommand("evaluate", "HITS@1/20 of a ranker checkpoint");
  add_common(s_eval, evaluate.common);
  s_eval->add_option("--ckpt", evaluate.ckpt, "ranker checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  s_eval->add_option("--data", evaluate.data, "ranking JSONL")
      ->required()
      ->check(CLI::ExistingFile)
      ->envname("F2R_DATA_DIR");
  s_eval->add_option("--vocab", evaluate.vocab, "vocabulary file")
      ->required()
      ->check(CLI::ExistingFile);
  s_eval->add_option("--out", evaluate.out, "optional metrics JSON path");
  s_eval->callback([&]() { run_evaluate(evaluate); });

  RunExperimentArgs experiment;
  auto* s_exp = app.add_subcommand("run-experiment", "train and score one or all settings");
  add_common(s_exp, experiment.common);
  s_exp->add_option("--data", experiment.data, "synthetic corpus directory")
      ->required()
      ->envname("F2R_DATA_DIR");
  s_exp->add_option("--out", experiment.out, "output directory")->required();
  s_exp->add_option("--ckpt", experiment.ckpt, "converter checkpoint (FEED2RESP)");
  s_exp->add_option("--setting", experiment.setting,
                    "NOFEEDBACK|FEEDBACK|HEURISTIC|FEED2RESP|ALL (default: config)");
  s_exp->callback([&]() { run_run_experiment(experiment); });

  ExportAttentionArgs attention;
  auto* s_attn = app.add_subcommand("export-attention", "pooling-query attention heatmaps");
  add_common(s_attn, attention.common);
  s_attn->add_option("--ckpt", attention.ckpt, "discriminator checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  s_attn->add_option("--vocab", attention.vocab, "vocabulary file")
      ->required()
      ->check(CLI::ExistingFile);
  s_attn->add_option("--in", attention.in, "conversation JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  s_attn->add_option("--out", attention.out, "output directory")->required();
  s_attn->callback([&]() { run_export_attention(attention); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

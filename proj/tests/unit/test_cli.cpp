#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(F2R_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 4096> buf{};
  std::string output;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) output += buf.data();
  const int status = pclose(pipe);
  return CliResult{WEXITSTATUS(status), output};
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

std::size_t line_count(const std::string& path) {
  std::ifstream is(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) ++n;
  }
  return n;
}

const std::string kWork = "/tmp/f2r_cli_test";

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

std::string tiny_config_path() {
  const std::string path = kWork + "/config.json";
  const json cfg = {
      {"seed", 5},
      {"generator",
       {{"encoder_layers", 1}, {"decoder_layers", 1}, {"heads", 2}, {"token_dim", 32},
        {"style_dim", 32}, {"pos_dim", 32}, {"hidden", 32}, {"max_positions", 64}}},
      {"discriminator",
       {{"layers", 1}, {"heads", 2}, {"token_dim", 32}, {"style_dim", 32}, {"pos_dim", 32},
        {"hidden", 32}, {"max_positions", 64}}},
      {"ranker", {{"layers", 1}, {"heads", 2}, {"dim", 32}, {"max_positions", 48}}},
      {"ranker_training", {{"steps", 12}, {"batch_size", 4}}},
      {"f2r_training",
       {{"steps", 3}, {"batch_size", 2}, {"max_len", 8}, {"gen_lr", 1e-3},
        {"log_every", 1}, {"eval_every", 2}, {"eval_examples", 4}}},
      {"synthetic", {{"pairs_per_class", 60}}},
      {"experiment", {{"seeds", {1, 2}}, {"max_len", 8}}},
  };
  std::ofstream os(path);
  os << cfg.dump(2);
  return path;
}

}  // namespace

TEST_CASE("cli exit codes") {
  Workspace ws;
  CHECK(run_cli("definitely-not-a-subcommand").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("evaluate").exit_code == 2);  // missing required flags
  // Runtime failure (missing file) exits 1 with a diagnostic.
  const CliResult r = run_cli("train-f2r --data /tmp/f2r_missing_dir --out " + kWork + "/x");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("full pipeline: synthetic corpus, training, conversion, evaluation") {
  Workspace ws;
  const std::string cfg = tiny_config_path();
  const std::string data = kWork + "/synth";

  // make-synthetic
  CHECK(run_cli("make-synthetic --config " + cfg + " --out " + data).exit_code == 0);
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "vocab.json", "oracle.jsonl",
                        "ranking_dev.jsonl", "ranking_test.jsonl", "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(data + "/" + std::string(f)));
  }

  // ingest does not mutate its input and preserves record counts.
  const std::string ingest_out = kWork + "/ingested.jsonl";
  const std::string before = slurp(data + "/train.jsonl");
  CHECK(run_cli("ingest --in " + data + "/train.jsonl --format jsonl --out " + ingest_out)
            .exit_code == 0);
  CHECK(slurp(data + "/train.jsonl") == before);
  CHECK(line_count(ingest_out) == line_count(data + "/train.jsonl"));

  // convert --mode heuristic: 1:1 line mapping.
  const std::string conv_out = kWork + "/converted.jsonl";
  CHECK(run_cli("convert --mode heuristic --in " + data + "/valid.jsonl --out " + conv_out)
            .exit_code == 0);
  CHECK(line_count(conv_out) == line_count(data + "/valid.jsonl"));
  {
    std::ifstream is(conv_out);
    std::string line;
    std::getline(is, line);
    const json rec = json::parse(line);
    CHECK(rec.contains("converted"));
    CHECK(!rec["converted"].get<std::string>().empty());
  }

  // train-f2r (tiny): produces checkpoints, history, metrics, manifest.
  const std::string run_dir = kWork + "/run";
  const CliResult train = run_cli("train-f2r --config " + cfg + " --data " + data + " --out " +
                                  run_dir);
  CHECK(train.exit_code == 0);
  for (const char* f : {"gen.ckpt", "disc.ckpt", "vocab.json", "loss_history.csv", "metrics.json",
                        "manifest.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(run_dir + "/" + std::string(f)));
  }
  {
    std::ifstream is(run_dir + "/loss_history.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "step,loss_self,loss_cycle,loss_style,disc_loss,fooling_rate");
  }

  // convert --mode f2r with the trained checkpoint.
  const std::string conv2 = kWork + "/converted_f2r.jsonl";
  CHECK(run_cli("convert --mode f2r --in " + data + "/valid.jsonl --out " + conv2 + " --ckpt " +
                run_dir + "/gen.ckpt --vocab " + run_dir + "/vocab.json --config " + cfg)
            .exit_code == 0);
  CHECK(line_count(conv2) == line_count(data + "/valid.jsonl"));

  // train-ranker on pairs derived from the corpus; then evaluate.
  const std::string pairs = kWork + "/pairs.jsonl";
  {
    std::ifstream is(data + "/train.jsonl");
    std::ofstream os(pairs);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json rec = json::parse(line);
      if (rec["style"].get<int>() != 0) continue;
      std::string ctx = "[P1]";
      for (const auto& t : rec["turns"]) {
        ctx += " " + t["text"].get<std::string>();
      }
      os << json{{"context", ctx}, {"response", rec["response"].get<std::string>()}}.dump()
         << "\n";
    }
  }
  const std::string ranker_ckpt = kWork + "/ranker.ckpt";
  CHECK(run_cli("train-ranker --config " + cfg + " --in " + pairs + " --vocab " + data +
                "/vocab.json --out " + ranker_ckpt)
            .exit_code == 0);

  const std::string eval_cmd = "evaluate --config " + cfg + " --ckpt " + ranker_ckpt +
                               " --data " + data + "/ranking_dev.jsonl --vocab " + data +
                               "/vocab.json --out " + kWork + "/metrics.json";
  const CliResult e1 = run_cli(eval_cmd);
  const CliResult e2 = run_cli(eval_cmd);
  CHECK(e1.exit_code == 0);
  // Deterministic: identical stdout and identical metric bytes.
  CHECK(e1.output == e2.output);
  const json metrics = json::parse(e1.output);
  CHECK(metrics.contains("hits@1/20"));
  CHECK(metrics.contains("n"));
  CHECK(metrics.contains("seed"));
  CHECK(fs::exists(kWork + "/metrics.json"));

  // export-attention on the trained discriminator.
  const std::string attn_dir = kWork + "/attn";
  const std::string feedback_sample = kWork + "/fb.jsonl";
  {
    std::ofstream os(feedback_sample);
    os << R"({"turns": ["hello"], "response": "you should have said yes", "style": 1})"
       << "\n";
  }
  CHECK(run_cli("export-attention --ckpt " + run_dir + "/disc.ckpt --vocab " + run_dir +
                "/vocab.json --in " + feedback_sample + " --out " + attn_dir)
            .exit_code == 0);
  CHECK(fs::exists(attn_dir + "/attention_000.json"));
  {
    const json attn = json::parse(slurp(attn_dir + "/attention_000.json"));
    REQUIRE(attn.contains("tokens"));
    REQUIRE(attn.contains("layers"));
    for (const auto& layer : attn["layers"]) {
      for (const auto& head : layer) {
        double sum = 0.0;
        for (const auto& w : head) sum += w.get<double>();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  // run-experiment over two settings, reports + CSV.
  const std::string exp_dir = kWork + "/exp";
  const CliResult exp = run_cli("run-experiment --config " + cfg + " --data " + data + " --out " +
                                exp_dir + " --setting FEEDBACK");
  CHECK(exp.exit_code == 0);
  CHECK(fs::exists(exp_dir + "/report_FEEDBACK.json"));
  CHECK(fs::exists(exp_dir + "/reports.csv"));
  const json report = json::parse(slurp(exp_dir + "/report_FEEDBACK.json"));
  CHECK(report["seeds"].size() == 2);
  CHECK(report["dev"]["per_seed"].size() == 2);
}

TEST_CASE("manifests are byte-identical across identical runs") {
  Workspace ws;
  const std::string cfg = tiny_config_path();
  const std::string d1 = kWork + "/synth1";
  const std::string d2 = kWork + "/synth2";
  CHECK(run_cli("make-synthetic --config " + cfg + " --out " + d1).exit_code == 0);
  CHECK(run_cli("make-synthetic --config " + cfg + " --out " + d2).exit_code == 0);
  auto strip_dir = [](std::string s, const std::string& dir) {
    std::size_t pos;
    while ((pos = s.find(dir)) != std::string::npos) s.erase(pos, dir.size());
    return s;
  };
  CHECK(strip_dir(slurp(d1 + "/manifest.json"), d1) == strip_dir(slurp(d2 + "/manifest.json"), d2));
  CHECK(slurp(d1 + "/train.jsonl") == slurp(d2 + "/train.jsonl"));
  CHECK(slurp(d1 + "/ranking_dev.jsonl") == slurp(d2 + "/ranking_dev.jsonl"));
}

TEST_CASE("unknown config keys are rejected") {
  Workspace ws;
  const std::string bad = kWork + "/bad.json";
  {
    std::ofstream os(bad);
    os << R"({"seed": 1, "totally_unknown_key": 2})";
  }
  const CliResult r = run_cli("make-synthetic --config " + bad + " --out " + kWork + "/x");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("unknown key") != std::string::npos);
}

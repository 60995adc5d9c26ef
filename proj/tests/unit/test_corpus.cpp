#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "f2r/corpus.hpp"
#include "f2r/loaders.hpp"

using namespace f2r;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "/tmp/f2r_test_" + name;
  std::ofstream os(path, std::ios::trunc);
  os << content;
  return path;
}

Conversation conv(std::vector<std::string> turns, std::string response,
                  Style style = Style::kNatural) {
  Conversation c;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const bool human = ((turns.size() - 1 - i) % 2) == 0;
    c.turns.push_back(Turn{human ? Speaker::kHuman : Speaker::kBot, turns[i]});
  }
  c.final_response = std::move(response);
  c.style = style;
  return c;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
  CHECK(tokenize_text("Hello, World!") == std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(tokenize_text("i've  got\tspaces") == std::vector<std::string>{"i've", "got", "spaces"});
  CHECK(tokenize_text("") == std::vector<std::string>{});
}

TEST_CASE("reserved delimiters survive tokenization atomically") {
  const auto toks = tokenize_text("[P1] hi there [P2] ok [RES] fine");
  CHECK(toks == std::vector<std::string>{"[P1]", "hi", "there", "[P2]", "ok", "[RES]", "fine"});
}

TEST_CASE("sanitization escapes reserved tokens case-insensitively") {
  CHECK(sanitize_text("use [RES] here") == "use [_res_] here");
  CHECK(sanitize_text("use [res] here") == "use [_res_] here");
  CHECK(sanitize_text("[P1][p2]") == "[_p1_][_p2_]");
  // After sanitization + tokenization no reserved token remains.
  const auto toks = tokenize_text(sanitize_text("[RES] [P1] [P2]"));
  for (const auto& t : toks) {
    CHECK(t != "[RES]");
    CHECK(t != "[P1]");
    CHECK(t != "[P2]");
  }
}

TEST_CASE("round trip: detokenize of tokenize is identity on in-vocab text") {
  Vocab v = Vocab::build({"yes or no", "the quick brown fox", "i've got rhythm"});
  Rng rng = make_rng(33);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_int_distribution<int> tok(Vocab::kReservedCount, v.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> words;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) words.push_back(v.token(tok(rng)));
    const std::string text = join_tokens(words);
    CHECK(v.decode(v.encode(text)) == text);
  }
}

TEST_CASE("tokenize round trips the documented examples") {
  Vocab v = Vocab::build({"yes or no"});
  CHECK(v.decode(v.encode("yes or no")) == "yes or no");
  CHECK(v.encode("").empty());
  CHECK(v.decode({}) == "");
  // OOV maps to UNK.
  const auto ids = v.encode("yes zebra no");
  CHECK(ids[1] == Vocab::kUnk);
}

TEST_CASE("vocab save/load preserves ids and reserved block") {
  Vocab v = Vocab::build({"alpha beta gamma delta"});
  const std::string path = write_temp("vocab.json", "");
  v.save(path);
  Vocab w = Vocab::load(path);
  CHECK(w.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(w.token(i) == v.token(i));
  CHECK(w.id("beta") == v.id("beta"));
  std::remove(path.c_str());
}

TEST_CASE("assemble_context follows the delimiter convention") {
  CHECK(assemble_context(conv({"A", "B"}, "R"), 2) == "[P1] a [P2] b [RES] r");
  CHECK(assemble_context(conv({"A"}, "R"), 2) == "[P1] a [RES] r");
  CHECK(assemble_context(conv({"A", "B", "C"}, "R"), 2) == "[P1] b [P2] c [RES] r");
}

TEST_CASE("assembly emits exactly one [RES] and no adjacent delimiters") {
  Rng rng = make_rng(5);
  const std::vector<std::string> words = {"hi", "ok", "sure", "fine", "yes"};
  std::uniform_int_distribution<int> nturns(1, 5);
  std::uniform_int_distribution<int> wordpick(0, static_cast<int>(words.size()) - 1);
  std::uniform_int_distribution<int> window(1, 4);
  const std::set<std::string> delims = {"[P1]", "[P2]", "[RES]"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> turns;
    const int n = nturns(rng);
    for (int i = 0; i < n; ++i) turns.push_back(words[wordpick(rng)]);
    const std::string ctx = assemble_context(conv(turns, words[wordpick(rng)]), window(rng));
    const auto toks = tokenize_text(ctx);
    int res_count = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (toks[i] == "[RES]") ++res_count;
      if (i + 1 < toks.size()) {
        CHECK_FALSE((delims.count(toks[i]) && delims.count(toks[i + 1])));
      }
    }
    CHECK(res_count == 1);
  }
}

TEST_CASE("jsonl loader parses minimal records") {
  const std::string path = write_temp(
      "mini.jsonl", R"({"turns": ["hi"], "response": "hello", "style": 0})" "\n");
  const auto convs = load_dialogue_corpus(path, CorpusFormat::kJsonl);
  REQUIRE(convs.size() == 1);
  CHECK(convs[0].turns.size() == 1);
  CHECK(convs[0].turns[0].text == "hi");
  CHECK(convs[0].final_response == "hello");
  CHECK(convs[0].style == Style::kNatural);
  std::remove(path.c_str());
}

TEST_CASE("jsonl loader reports the offending line") {
  const std::string path = write_temp("bad.jsonl",
                                      R"({"turns": ["hi"], "response": "ok", "style": 0})"
                                      "\nnot json at all\n");
  try {
    load_dialogue_corpus(path, CorpusFormat::kJsonl);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("jsonl loader rejects empty files") {
  const std::string path = write_temp("empty.jsonl", "\n\n");
  CHECK_THROWS_AS(load_dialogue_corpus(path, CorpusFormat::kJsonl), Error);
  std::remove(path.c_str());
}

TEST_CASE("parlai loader flattens episodes and drops personas") {
  const std::string path = write_temp(
      "episodes.txt",
      "text:your persona: i love cats\\nhello there\tlabels:hi how are you\n"
      "text:good and you?\tlabels:great thanks\tepisode_done:True\n"
      "text:fresh start\tlabels:sure\tepisode_done:True\n");
  const auto convs = load_dialogue_corpus(path, CorpusFormat::kParlaiText, Style::kNatural);
  REQUIRE(convs.size() == 3);
  CHECK(convs[0].turns.size() == 1);
  CHECK(convs[0].turns[0].text == "hello there");
  CHECK(convs[0].final_response == "hi how are you");
  // Second exchange carries the episode so far.
  CHECK(convs[1].turns.size() == 3);
  CHECK(convs[1].final_response == "great thanks");
  // Speakers alternate, ending with the asker.
  for (std::size_t i = 0; i + 1 < convs[1].turns.size(); ++i) {
    CHECK(convs[1].turns[i].speaker != convs[1].turns[i + 1].speaker);
  }
  CHECK(convs[1].turns.back().speaker == Speaker::kHuman);
  // Episode reset.
  CHECK(convs[2].turns.size() == 1);
  std::remove(path.c_str());
}

TEST_CASE("build_style_corpus balances, splits and is deterministic") {
  std::vector<Conversation> dialogue, feedback;
  for (int i = 0; i < 25; ++i) {
    dialogue.push_back(conv({"q" + std::to_string(i)}, "a" + std::to_string(i)));
  }
  for (int i = 0; i < 10; ++i) {
    feedback.push_back(conv({"q" + std::to_string(i)}, "f" + std::to_string(i),
                            Style::kFeedback));
  }
  SplitSpec spec;
  spec.seed = 99;
  const StyleCorpus a = build_style_corpus(dialogue, feedback, spec);
  const StyleCorpus b = build_style_corpus(dialogue, feedback, spec);

  CHECK(a.train.size() == 16);
  CHECK(a.valid.size() == 2);
  CHECK(a.test.size() == 2);

  auto class_gap = [](const std::vector<StyleTransferExample>& xs) {
    long n0 = 0, n1 = 0;
    for (const auto& ex : xs) (ex.style == Style::kNatural ? n0 : n1)++;
    return std::abs(n0 - n1);
  };
  CHECK(class_gap(a.train) <= 1);
  CHECK(class_gap(a.valid) <= 1);
  CHECK(class_gap(a.test) <= 1);

  auto key = [](const StyleTransferExample& ex) { return ex.response; };
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(key(a.train[i]) == key(b.train[i]));
  for (std::size_t i = 0; i < a.valid.size(); ++i) CHECK(key(a.valid[i]) == key(b.valid[i]));
  for (std::size_t i = 0; i < a.test.size(); ++i) CHECK(key(a.test[i]) == key(b.test[i]));
}

TEST_CASE("build_style_corpus rejects bad inputs") {
  std::vector<Conversation> dialogue = {conv({"q"}, "a")};
  SplitSpec spec;
  CHECK_THROWS_AS(build_style_corpus(dialogue, {}, spec), Error);
  std::vector<Conversation> feedback = {conv({"q"}, "f", Style::kFeedback),
                                        conv({"r"}, "g", Style::kFeedback)};
  CHECK_THROWS_AS(build_style_corpus(dialogue, feedback, spec), Error);
}

TEST_CASE("class balance holds across random sizes") {
  Rng rng = make_rng(123);
  std::uniform_int_distribution<int> size(3, 60);
  for (int trial = 0; trial < 20; ++trial) {
    const int nf = size(rng);
    const int nd = nf + size(rng);
    std::vector<Conversation> dialogue, feedback;
    for (int i = 0; i < nd; ++i) dialogue.push_back(conv({"q"}, "a" + std::to_string(i)));
    for (int i = 0; i < nf; ++i) {
      feedback.push_back(conv({"q"}, "f" + std::to_string(i), Style::kFeedback));
    }
    SplitSpec spec;
    spec.seed = static_cast<std::uint64_t>(trial);
    const StyleCorpus c = build_style_corpus(dialogue, feedback, spec);
    for (const auto* split : {&c.train, &c.valid, &c.test}) {
      long n0 = 0, n1 = 0;
      for (const auto& ex : *split) (ex.style == Style::kNatural ? n0 : n1)++;
      CHECK(std::abs(n0 - n1) <= 1);
    }
    const std::size_t total = c.train.size() + c.valid.size() + c.test.size();
    CHECK(total == static_cast<std::size_t>(2 * nf));
  }
}

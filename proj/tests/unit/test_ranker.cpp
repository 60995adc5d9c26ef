#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "f2r/ranker.hpp"
#include "tiny_models.hpp"

using namespace f2r;

namespace {

RankerConfig tiny_ranker(RankerArch arch, int codes, int vocab_size) {
  RankerConfig c;
  c.arch = arch;
  c.layers = 2;
  c.heads = 2;
  c.dim = 32;
  c.codes = codes;
  c.vocab_size = vocab_size;
  c.max_positions = 32;
  return c;
}

RankingExample example_with_correct_at(int idx) {
  RankingExample ex;
  ex.context = "ctx";
  for (int i = 0; i < RankingExample::kCandidates; ++i) {
    ex.candidates.push_back("cand " + std::to_string(i));
  }
  ex.correct_index = idx;
  return ex;
}

}  // namespace

TEST_CASE("hits_at_k oracle and rank boundaries") {
  std::vector<RankingExample> examples = {example_with_correct_at(3), example_with_correct_at(0)};
  const Scorer oracle = [](const RankingExample& ex) {
    std::vector<double> s(ex.candidates.size(), 0.0);
    s[static_cast<std::size_t>(ex.correct_index)] = 1.0;
    return s;
  };
  CHECK(hits_at_k(oracle, examples, 1) == doctest::Approx(1.0));

  // Correct candidate strictly second.
  const Scorer second = [](const RankingExample& ex) {
    std::vector<double> s(ex.candidates.size(), 0.0);
    s[static_cast<std::size_t>(ex.correct_index)] = 1.0;
    s[static_cast<std::size_t>((ex.correct_index + 1) % RankingExample::kCandidates)] = 2.0;
    return s;
  };
  CHECK(hits_at_k(second, examples, 1) == doctest::Approx(0.0));
  CHECK(hits_at_k(second, examples, 2) == doctest::Approx(1.0));
}

TEST_CASE("ties break toward the lower candidate index") {
  const Scorer flat = [](const RankingExample& ex) {
    return std::vector<double>(ex.candidates.size(), 0.5);
  };
  std::vector<RankingExample> first = {example_with_correct_at(0)};
  std::vector<RankingExample> sixth = {example_with_correct_at(5)};
  CHECK(hits_at_k(flat, first, 1) == doctest::Approx(1.0));
  CHECK(hits_at_k(flat, sixth, 1) == doctest::Approx(0.0));
  CHECK(hits_at_k(flat, sixth, 5) == doctest::Approx(0.0));
  CHECK(hits_at_k(flat, sixth, 6) == doctest::Approx(1.0));
}

TEST_CASE("uniform random scorer lands near 1/20") {
  Rng rng = make_rng(99);
  std::vector<RankingExample> examples;
  std::uniform_int_distribution<int> pos(0, RankingExample::kCandidates - 1);
  for (int i = 0; i < 2000; ++i) examples.push_back(example_with_correct_at(pos(rng)));
  auto scorer_rng = std::make_shared<Rng>(make_rng(100));
  const Scorer random_scorer = [scorer_rng](const RankingExample& ex) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s;
    for (std::size_t i = 0; i < ex.candidates.size(); ++i) s.push_back(u(*scorer_rng));
    return s;
  };
  const double hits = hits_at_k(random_scorer, examples, 1);
  CHECK(std::abs(hits - 0.05) < 0.02);
}

TEST_CASE("hits_at_k is monotone in k and invariant to increasing transforms") {
  Rng rng = make_rng(101);
  std::vector<RankingExample> examples;
  std::uniform_int_distribution<int> pos(0, RankingExample::kCandidates - 1);
  for (int i = 0; i < 300; ++i) examples.push_back(example_with_correct_at(pos(rng)));

  // Deterministic scorer keyed on strings so it can be evaluated twice.
  const Scorer base = [](const RankingExample& ex) {
    std::vector<double> s;
    for (const auto& c : ex.candidates) {
      s.push_back(static_cast<double>(fnv1a_hash(ex.context + c) % 10007) / 10007.0);
    }
    return s;
  };
  const Scorer transformed = [&base](const RankingExample& ex) {
    auto s = base(ex);
    for (double& v : s) v = std::exp(3.0 * v) + 11.0;
    return s;
  };

  double prev = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double h = hits_at_k(base, examples, k);
    CHECK(h >= prev);
    CHECK(h == doctest::Approx(hits_at_k(transformed, examples, k)));
    prev = h;
  }
  CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("bi scoring is independent of other candidates and deterministic") {
  const Vocab vocab = testing::vocab20();
  const Ranker ranker(tiny_ranker(RankerArch::kBi, 1, vocab.size()), 1);
  const auto ctx = vocab.encode("yes ok the day");
  const auto cand_a = vocab.encode("good dog");
  const auto cand_b = vocab.encode("fine cat");
  const double a_alone = ranker.score_bi(ctx, cand_a);
  const auto both = ranker.score(ctx, {cand_a, cand_b});
  const auto swapped = ranker.score(ctx, {cand_b, cand_a});
  CHECK(a_alone == doctest::Approx(both[0]));
  CHECK(both[0] == doctest::Approx(swapped[1]));
  CHECK(both[1] == doctest::Approx(swapped[0]));
}

TEST_CASE("poly with one code equals the bi-encoder on shared weights") {
  const Vocab vocab = testing::vocab20();
  const Ranker bi(tiny_ranker(RankerArch::kBi, 1, vocab.size()), 2);
  Ranker poly(tiny_ranker(RankerArch::kPoly, 1, vocab.size()), 3);
  poly.params().copy_values_from(bi.params());

  Rng rng = make_rng(4);
  for (int i = 0; i < 10; ++i) {
    const auto ctx = testing::random_ids(6, vocab.size(), rng);
    const auto cand = testing::random_ids(4, vocab.size(), rng);
    CHECK(std::abs(poly.score_poly(ctx, {cand})[0] - bi.score_bi(ctx, cand)) < 1e-6);
  }
}

TEST_CASE("duplicate candidates get identical poly scores") {
  const Vocab vocab = testing::vocab20();
  const Ranker poly(tiny_ranker(RankerArch::kPoly, 4, vocab.size()), 5);
  Rng rng = make_rng(6);
  const auto ctx = testing::random_ids(5, vocab.size(), rng);
  const auto cand = testing::random_ids(3, vocab.size(), rng);
  const auto scores = poly.score_poly(ctx, {cand, cand, testing::random_ids(3, 20, rng)});
  CHECK(scores[0] == doctest::Approx(scores[1]).epsilon(1e-15));
}

TEST_CASE("poly scores react to context changes") {
  const Vocab vocab = testing::vocab20();
  const Ranker poly(tiny_ranker(RankerArch::kPoly, 4, vocab.size()), 7);
  Rng rng = make_rng(8);
  const auto cand = testing::random_ids(4, vocab.size(), rng);
  const auto ctx_a = testing::random_ids(5, vocab.size(), rng);
  const auto ctx_b = testing::random_ids(5, vocab.size(), rng);
  CHECK(poly.score_poly(ctx_a, {cand})[0] != doctest::Approx(poly.score_poly(ctx_b, {cand})[0]));
}

TEST_CASE("length overflow raises") {
  const Vocab vocab = testing::vocab20();
  RankerConfig cfg = tiny_ranker(RankerArch::kBi, 1, vocab.size());
  cfg.max_positions = 4;
  const Ranker ranker(cfg, 9);
  Rng rng = make_rng(10);
  CHECK_THROWS_AS(ranker.score_bi(testing::random_ids(5, 20, rng), {9}), Error);
  CHECK_THROWS_AS(ranker.score_bi({}, {9}), Error);
}

TEST_CASE("train_ranker: zero steps, determinism, and keyword separability") {
  // Keyword corpus: the correct response repeats a keyword from the context.
  std::vector<std::string> keywords;
  for (int i = 0; i < 30; ++i) keywords.push_back("kw" + std::to_string(i));
  std::vector<std::string> texts;
  std::vector<RankingPair> pairs;
  for (int rep = 0; rep < 6; ++rep) {
    for (const auto& kw : keywords) {
      pairs.push_back(RankingPair{"[P1] hi [P2] talk " + kw, kw + " is fine"});
    }
  }
  for (const auto& p : pairs) {
    texts.push_back(p.context);
    texts.push_back(p.response);
  }
  const Vocab vocab = Vocab::build(texts);

  RankerConfig cfg = tiny_ranker(RankerArch::kBi, 1, vocab.size());
  Ranker ranker(cfg, 11);
  RankerTrainConfig tcfg;
  tcfg.steps = 0;
  const ad::Matrix before = ranker.params().at("ctx.tok_emb").value;
  train_ranker(ranker, vocab, pairs, tcfg);
  CHECK(ranker.params().at("ctx.tok_emb").value == before);

  auto run_loss = [&](std::uint64_t seed) {
    Ranker r(cfg, 12);
    RankerTrainConfig t;
    t.steps = 20;
    t.batch_size = 8;
    t.lr = 2.5e-3;
    t.seed = seed;
    return train_ranker(r, vocab, pairs, t);
  };
  CHECK(run_loss(13) == run_loss(13));

  Ranker learner(cfg, 14);
  RankerTrainConfig t;
  t.steps = 400;
  t.batch_size = 8;
  t.lr = 2.5e-3;
  t.seed = 15;
  train_ranker(learner, vocab, pairs, t);

  Rng rng = make_rng(16);
  std::vector<RankingExample> eval;
  std::uniform_int_distribution<int> pos(0, RankingExample::kCandidates - 1);
  for (int i = 0; i < 60; ++i) {
    const auto& kw = keywords[static_cast<std::size_t>(i) % keywords.size()];
    RankingExample ex;
    ex.context = "[P1] hi [P2] talk " + kw;
    std::vector<std::string> others;
    for (const auto& o : keywords) {
      if (o != kw) others.push_back(o + " is fine");
    }
    std::shuffle(others.begin(), others.end(), rng);
    ex.correct_index = pos(rng);
    ex.candidates.assign(others.begin(), others.begin() + RankingExample::kCandidates - 1);
    ex.candidates.insert(ex.candidates.begin() + ex.correct_index, kw + " is fine");
    ex.validate();
    eval.push_back(std::move(ex));
  }
  const double hits = hits_at_k(make_ranker_scorer(learner, vocab), eval, 1);
  CHECK(hits > 0.9);
}

TEST_CASE("provided-negative training fits its candidate lists") {
  const Vocab vocab = testing::vocab20();
  RankerConfig cfg = tiny_ranker(RankerArch::kPoly, 2, vocab.size());
  Ranker ranker(cfg, 17);
  Rng rng = make_rng(18);
  std::vector<RankingExample> examples;
  std::uniform_int_distribution<int> pos(0, RankingExample::kCandidates - 1);
  for (int i = 0; i < 12; ++i) {
    RankingExample ex;
    ex.context = "ok the day";
    ex.correct_index = pos(rng);
    for (int c = 0; c < RankingExample::kCandidates; ++c) {
      ex.candidates.push_back(c == ex.correct_index ? "yes dog sun" : "word" + std::to_string(c));
    }
    examples.push_back(ex);
  }
  RankerTrainConfig tcfg;
  tcfg.steps = 25;
  tcfg.batch_size = 4;
  tcfg.lr = 2.5e-3;
  tcfg.in_batch_negatives = false;
  const double final_loss = train_ranker_provided(ranker, vocab, examples, tcfg);
  CHECK(std::isfinite(final_loss));
  CHECK(final_loss < std::log(20.0));
}

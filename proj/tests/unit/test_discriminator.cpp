#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "f2r/losses.hpp"
#include "grad_check.hpp"
#include "tiny_models.hpp"

using namespace f2r;

TEST_CASE("predictions are distributions with argmax class") {
  const Discriminator disc(testing::tiny_discriminator_config(), 1);
  Rng rng = make_rng(2);
  for (int i = 0; i < 10; ++i) {
    const auto x = testing::random_ids(5, 20, rng);
    const auto h = testing::random_ids(3, 20, rng);
    const StylePrediction pred = disc.classify(x, h);
    CHECK(pred.probs[0] + pred.probs[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pred.probs[0] >= 0.0);
    CHECK(pred.probs[1] >= 0.0);
    const int argmax = pred.probs[1] > pred.probs[0] ? 1 : 0;
    CHECK(style_value(pred.predicted) == argmax);
  }
}

TEST_CASE("zeroed parameters give exactly even class probabilities") {
  Discriminator disc(testing::tiny_discriminator_config(), 3);
  testing::zero_params(disc.params());
  const StylePrediction pred = disc.classify({9, 10, 11}, {12});
  CHECK(pred.probs[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pred.probs[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("random initialization is uninformative on average") {
  const Discriminator disc(testing::tiny_discriminator_config(), 4);
  Rng rng = make_rng(5);
  double mean_p1 = 0.0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const auto x = testing::random_ids(6, 20, rng);
    mean_p1 += disc.classify(x, {}).probs[1];
  }
  mean_p1 /= n;
  CHECK(std::abs(mean_p1 - 0.5) < 0.1);
}

TEST_CASE("one-hot soft input classifies identically to hard ids") {
  const Discriminator disc(testing::tiny_discriminator_config(), 6);
  Rng rng = make_rng(7);
  for (int i = 0; i < 10; ++i) {
    const auto x = testing::random_ids(5, 20, rng);
    const auto h = testing::random_ids(2, 20, rng);
    const StylePrediction hard = disc.classify(x, h);
    const StylePrediction soft = disc.classify(SoftSequence::one_hot(x, 20), h);
    CHECK(std::abs(hard.probs[0] - soft.probs[0]) < 1e-6);
    CHECK(std::abs(hard.probs[1] - soft.probs[1]) < 1e-6);
  }
}

TEST_CASE("permuting vocabulary ids together with embedding rows is a no-op") {
  const int v = 20;
  Discriminator disc(testing::tiny_discriminator_config(v), 8);
  Rng rng = make_rng(9);

  // Permute only the non-reserved block.
  std::vector<int> perm(v);
  for (int i = 0; i < v; ++i) perm[i] = i;
  std::shuffle(perm.begin() + Vocab::kReservedCount, perm.end(), rng);

  Discriminator permuted(testing::tiny_discriminator_config(v), 8);
  permuted.params().copy_values_from(disc.params());
  ad::Matrix& emb = permuted.params().at("tok_emb").value;
  const ad::Matrix orig = disc.params().at("tok_emb").value;
  for (int i = 0; i < v; ++i) emb.row(perm[i]) = orig.row(i);

  for (int trial = 0; trial < 8; ++trial) {
    const auto x = testing::random_ids(6, v, rng);
    const auto h = testing::random_ids(3, v, rng);
    std::vector<int> px, ph;
    for (int id : x) px.push_back(perm[id]);
    for (int id : h) ph.push_back(perm[id]);
    const StylePrediction a = disc.classify(x, h);
    const StylePrediction b = permuted.classify(px, ph);
    CHECK(a.probs[0] == doctest::Approx(b.probs[0]).epsilon(1e-12));
  }
}

TEST_CASE("gradient w.r.t. soft sequence entries matches finite differences") {
  const Discriminator disc(testing::tiny_discriminator_config(), 10);
  Rng rng = make_rng(11);
  const auto h = testing::random_ids(2, 20, rng);

  // A generic (non-normalized-gradient-friendly) soft input.
  ad::Matrix soft0(3, 20);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int r = 0; r < 3; ++r) {
    double sum = 0;
    for (int c = 0; c < 20; ++c) {
      soft0(r, c) = u(rng);
      sum += soft0(r, c);
    }
    soft0.row(r) /= sum;
  }

  auto loss_of = [&](const ad::Matrix& s, ad::Matrix* grad_out) {
    ad::Tape tape;
    TapeBinding p(tape, disc.params());
    ad::Var leaf = tape.leaf(s, true);
    ad::Var lg = disc.logits(tape, p, SoftInput{leaf}, h);
    ad::Var ls = tape.log_softmax_rows(lg);
    ad::Var loss = tape.scale(tape.gather_coeffs(ls, {{0, 1}}), -1.0);
    if (grad_out) {
      tape.backward(loss);
      *grad_out = tape.grad(leaf);
    }
    return tape.value(loss)(0, 0);
  };

  ad::Matrix analytic;
  loss_of(soft0, &analytic);
  std::uniform_int_distribution<int> pr(0, 2), pc(0, 19);
  const double eps = 1e-6;
  for (int s = 0; s < 25; ++s) {
    const int r = pr(rng), c = pc(rng);
    ad::Matrix sp = soft0, sm = soft0;
    sp(r, c) += eps;
    sm(r, c) -= eps;
    const double fd = (loss_of(sp, nullptr) - loss_of(sm, nullptr)) / (2 * eps);
    CHECK(testing::rel_err(analytic(r, c), fd) < 1e-4);
  }
}

TEST_CASE("attention maps are row-stochastic over the content tokens") {
  const Discriminator disc(testing::tiny_discriminator_config(), 12);
  const Vocab vocab = testing::vocab20();
  Rng rng = make_rng(13);
  const auto x = testing::random_ids(5, 20, rng);
  const auto h = testing::random_ids(3, 20, rng);
  const AttentionMaps maps = disc.attention_maps(x, h, vocab);

  CHECK(maps.tokens.size() == 5 + 3 + 1);  // history + [RES] + x
  REQUIRE(maps.layers.size() == 2);
  for (const auto& layer : maps.layers) {
    REQUIRE(layer.size() == 2);
    for (const auto& head : layer) {
      REQUIRE(head.size() == maps.tokens.size());
      double sum = 0.0;
      for (double w : head) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
}

TEST_CASE("single content token receives attention weight exactly one") {
  const Discriminator disc(testing::tiny_discriminator_config(), 14);
  const Vocab vocab = testing::vocab20();
  const AttentionMaps maps = disc.attention_maps({9}, {}, vocab);
  REQUIRE(maps.tokens.size() == 1);
  for (const auto& layer : maps.layers) {
    for (const auto& head : layer) {
      REQUIRE(head.size() == 1);
      CHECK(head[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention export writes the documented JSON shape") {
  const Discriminator disc(testing::tiny_discriminator_config(), 15);
  const Vocab vocab = testing::vocab20();
  const std::string path = "/tmp/f2r_attn.json";
  export_attention(disc, {9, 10}, {11}, vocab, path);
  std::ifstream is(path);
  REQUIRE(is);
  nlohmann::json j;
  is >> j;
  CHECK(j.contains("tokens"));
  CHECK(j.contains("layers"));
  CHECK(j["tokens"].size() == 4);  // h + [RES] + x(2)
  CHECK(j["layers"].size() == 2);
  std::remove(path.c_str());

  CHECK_THROWS_AS(export_attention(disc, {9}, {}, vocab, "/no_such_dir/x.json"), Error);
}

TEST_CASE("empty input is rejected") {
  const Discriminator disc(testing::tiny_discriminator_config(), 16);
  CHECK_THROWS_AS(disc.classify(std::vector<int>{}, {}), Error);
}

TEST_CASE("history flag controls conditioning") {
  DiscriminatorConfig cfg = testing::tiny_discriminator_config();
  cfg.use_history = false;
  const Discriminator no_hist(cfg, 17);
  Rng rng = make_rng(18);
  const auto x = testing::random_ids(4, 20, rng);
  const auto h1 = testing::random_ids(3, 20, rng);
  const auto h2 = testing::random_ids(3, 20, rng);
  CHECK(no_hist.classify(x, h1).probs[0] == doctest::Approx(no_hist.classify(x, h2).probs[0]));

  const Discriminator with_hist(testing::tiny_discriminator_config(), 17);
  CHECK(with_hist.classify(x, h1).probs[0] !=
        doctest::Approx(with_hist.classify(x, h2).probs[0]).epsilon(1e-12));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "tiny_models.hpp"

using namespace f2r;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generator checkpoints round-trip bit-exact") {
  const Generator gen(testing::tiny_generator_config(), 42);
  const std::string p1 = "/tmp/f2r_ckpt_a.bin";
  const std::string p2 = "/tmp/f2r_ckpt_b.bin";
  gen.save(p1);
  Generator loaded = Generator::load(p1);
  loaded.save(p2);

  CHECK(slurp(p1) == slurp(p2));
  const auto a = gen.params().all();
  const auto b = loaded.params().all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
  }
  CHECK(loaded.config().hidden == gen.config().hidden);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("discriminator checkpoints restore exactly") {
  const Discriminator disc(testing::tiny_discriminator_config(), 7);
  const std::string p = "/tmp/f2r_ckpt_disc.bin";
  disc.save(p);
  const Discriminator loaded = Discriminator::load(p);
  for (std::size_t i = 0; i < disc.params().all().size(); ++i) {
    CHECK(disc.params().all()[i]->value == loaded.params().all()[i]->value);
  }
  std::remove(p.c_str());
}

TEST_CASE("kind mismatch is rejected") {
  const Generator gen(testing::tiny_generator_config(), 1);
  const std::string p = "/tmp/f2r_ckpt_kind.bin";
  gen.save(p);
  CHECK_THROWS_AS(Discriminator::load(p), Error);
  std::remove(p.c_str());
}

TEST_CASE("non-checkpoint files are rejected") {
  const std::string p = "/tmp/f2r_ckpt_junk.bin";
  {
    std::ofstream os(p, std::ios::trunc);
    os << "this is not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(p), Error);
  std::remove(p.c_str());
  CHECK_THROWS_AS(load_checkpoint("/tmp/f2r_definitely_missing.bin"), Error);
}

TEST_CASE("restore rejects shape mismatches") {
  const Generator gen(testing::tiny_generator_config(), 3);
  const std::string p = "/tmp/f2r_ckpt_shape.bin";
  gen.save(p);
  const Checkpoint ckpt = load_checkpoint(p);
  GeneratorConfig other = testing::tiny_generator_config(21);
  Generator wrong(other, 3);
  CHECK_THROWS_AS(restore_params(wrong.params(), ckpt), Error);
  std::remove(p.c_str());
}

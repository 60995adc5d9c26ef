#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "f2r/common.hpp"
#include "f2r/heuristic.hpp"

using f2r::heuristic_convert;
using f2r::HeuristicRules;

// Hand-derived applications of the rule cascade, in rule order: filler strip,
// leading verb strip, leading connective strip, choice-marker strip, pronoun
// flips; whitespace renormalized after each stage.
TEST_CASE("golden rule-cascade corpus") {
  const std::vector<std::pair<std::string, std::string>> golden = {
      // The four documented cases.
      {"you could have spoken about your favorite food", "spoken about my favorite food"},
      {"you should have said yes the sugar cinnamon kind is my favorite",
       "yes the sugar cinnamon kind is my favorite"},
      {"the temperature is hot", "the temperature is hot"},
      {"tell me what your favorite breakfast food is", "what my favorite breakfast food is"},
      // Filler + verb + connective chains.
      {"you should have said yes", "yes"},
      {"you could have told me you are 30", "i am 30"},
      {"say that you like dogs", "i like dogs"},
      {"tell me about your day", "about my day"},
      {"you should say i am fine", "i am fine"},
      {"answered i am a doctor", "i am a doctor"},
      {"you could be nicer", "be nicer"},
      // Choice markers strip anywhere, literally.
      {"you should not say that", "say that"},
      {"whether you like it or not", "i like it or"},
      {"notice the gift i gave you", "ice the gt i gave you"},
      // Pronoun flips.
      {"you've been great", "i've been great"},
      {"you were right", "i was right"},
      {"you are wrong", "i am wrong"},
      {"you rock", "i rock"},
      {"say you are sorry", "i am sorry"},
      // Trailing-space anchors miss morphological variants.
      {"you should have admitted it", "admitted it"},
      {"talk about the weather", "the weather"},
      // Empty results fall back to the input.
      {"you should have", "you should have"},
      {"you could", "you could"},
      {"saying hello is polite", "hello is polite"},
      {"ask me anything", "anything"},
      {"you should have said you've got this", "i've got this"},
      {"tell me if you like coffee", "i like coffee"},
      // One-pass flips never cascade; unanchored trailing "you" survives.
      {"you are you", "i am you"},
      {"your answer was wrong", "my answer was wrong"},
      {"you could say hi or you could say hello", "hi or say hello"},
  };
  REQUIRE(golden.size() == 30);
  for (const auto& [input, expected] : golden) {
    CAPTURE(input);
    CHECK(heuristic_convert(input) == expected);
  }
}

TEST_CASE("case-insensitive matching, lowercase output") {
  CHECK(heuristic_convert("You COULD have Said YES") == "yes");
  CHECK(heuristic_convert("TELL me What YOUR Favorite breakfast food is") ==
        "what my favorite breakfast food is");
}

TEST_CASE("whitespace is normalized") {
  CHECK(heuristic_convert("  you   should   have said  yes  ") == "yes");
}

TEST_CASE("total on arbitrary bytes, output never empty") {
  f2r::Rng rng = f2r::make_rng(77);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_int_distribution<int> byte(1, 255);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) s += static_cast<char>(byte(rng));
    std::string out;
    REQUIRE_NOTHROW(out = heuristic_convert(s));
    CHECK_FALSE(out.empty());
  }
  // Unicode passes through untouched when no rule matches.
  CHECK(heuristic_convert("caf\xc3\xa9 ist sch\xc3\xb6n") == "caf\xc3\xa9 ist sch\xc3\xb6n");
}

TEST_CASE("pronoun flips are one-pass idempotent") {
  const auto& rules = HeuristicRules::standard();
  const std::vector<std::string> fragments = {"you ",  "your ", "you are ", "you were",
                                              "you've ", "i ",  "am ",     "was ",
                                              "rock ", "x "};
  f2r::Rng rng = f2r::make_rng(78);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_int_distribution<std::size_t> pick(0, fragments.size() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) s += fragments[pick(rng)];
    const std::string once = rules.flip_stage(s);
    CHECK(rules.flip_stage(once) == once);
    CHECK(once.find("you are ") == std::string::npos);
  }
}

TEST_CASE("flip ordering prefers the longest-intent pattern") {
  const auto& rules = HeuristicRules::standard();
  CHECK(rules.flip_stage("you are ok") == "i am ok");      // not "i are ok"
  CHECK(rules.flip_stage("your dog") == "my dog");         // not "i r dog"
  CHECK(rules.flip_stage("you've won ") == "i've won ");
}

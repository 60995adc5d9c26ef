#include "f2r/heuristic.hpp"

#include "f2r/corpus.hpp"

namespace f2r {

namespace {

std::string ascii_lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace

HeuristicRules::HeuristicRules() {
  // Filler removal, anywhere in the string. Alternatives are ordered longest
  // first so "you could have" wins over "you could".
  strip_rules_.emplace_back("you could have|you should have|you could|you should");
  // Leading reporting verbs. "asked" is anchored like its neighbours.
  strip_rules_.emplace_back(
      "^said|^saying|^say|^tell |^told |^admit |^asked |^ask |^answer |^answered |^talked "
      "|^talk ");
  // Leading connectives left behind by the verb strip.
  strip_rules_.emplace_back("^about|^me|^that");
  // Choice markers.
  strip_rules_.emplace_back("if|whether|not");

  // One-pass pronoun substitutions, first match wins at each position.
  flips_ = {
      {"you are ", "i am "},
      {"your ", "my "},
      {"you've ", "i've "},
      {"you were", "i was"},
      {"you ", "i "},
  };
}

const HeuristicRules& HeuristicRules::standard() {
  static const HeuristicRules rules;
  return rules;
}

std::string HeuristicRules::strip_stage(const std::string& lowercased) const {
  std::string s = lowercased;
  for (const auto& re : strip_rules_) {
    s = std::regex_replace(s, re, "");
    s = normalize_whitespace(s);
  }
  return s;
}

std::string HeuristicRules::flip_stage(const std::string& lowercased) const {
  std::string out;
  out.reserve(lowercased.size());
  std::size_t i = 0;
  while (i < lowercased.size()) {
    bool matched = false;
    for (const auto& [from, to] : flips_) {
      if (lowercased.compare(i, from.size(), from) == 0) {
        out += to;
        i += from.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += lowercased[i++];
  }
  return out;
}

std::string HeuristicRules::convert(const std::string& feedback) const {
  const std::string input = normalize_whitespace(ascii_lowercase(feedback));
  std::string s = strip_stage(input);
  s = normalize_whitespace(flip_stage(s));
  if (s.empty()) return input;
  return s;
}

std::string heuristic_convert(const std::string& feedback) {
  return HeuristicRules::standard().convert(feedback);
}

}  // namespace f2r

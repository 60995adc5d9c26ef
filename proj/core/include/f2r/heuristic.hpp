#pragma once

#include <regex>
#include <string>
#include <vector>

namespace f2r {

/// The fixed rule cascade that rewrites feedback into a plausible response:
/// three strip passes, a choice-marker strip, then one left-to-right pass of
/// pronoun substitutions. Rule order is part of the contract. Input is
/// lowercased before matching; whitespace is renormalized after every stage.
class HeuristicRules {
 public:
  static const HeuristicRules& standard();

  /// Full cascade. Total on arbitrary input; if the cascade deletes
  /// everything, the (lowercased, whitespace-normalized) input is returned so
  /// the result is never empty.
  std::string convert(const std::string& feedback) const;

  /// Strip stages only (rules 1-4).
  std::string strip_stage(const std::string& lowercased) const;
  /// Pronoun-flip stage only: a single left-to-right scan, first match wins,
  /// replacements are never rescanned.
  std::string flip_stage(const std::string& lowercased) const;

 private:
  HeuristicRules();
  std::vector<std::regex> strip_rules_;
  std::vector<std::pair<std::string, std::string>> flips_;
};

/// Convenience wrapper over HeuristicRules::standard().convert.
std::string heuristic_convert(const std::string& feedback);

}  // namespace f2r

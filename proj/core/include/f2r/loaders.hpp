#pragma once

#include <optional>
#include <string>
#include <vector>

#include "f2r/corpus.hpp"

namespace f2r {

enum class CorpusFormat { kJsonl, kParlaiText };

CorpusFormat corpus_format_from_string(const std::string& name);

/// Parse failure that carries the offending line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Loads a dialogue or feedback corpus.
///
/// JSONL records look like
///   {"turns": [{"speaker": "human|bot", "text": "..."}], "response": "...",
///    "style": 0|1}
/// Turns may also be plain strings; speakers are then inferred backwards from
/// the last turn (which is taken as the human addressing the responder).
/// "style" may be omitted per record when default_style is given.
///
/// The ParlAI text format is the tab-separated key:value episode format;
/// every exchange becomes one Conversation whose turns are the episode so
/// far. Persona lines are dropped.
std::vector<Conversation> load_dialogue_corpus(const std::string& path, CorpusFormat format,
                                               std::optional<Style> default_style = std::nullopt);

void save_conversations_jsonl(const std::string& path, const std::vector<Conversation>& convs);

struct RankingExample {
  std::string context;
  std::vector<std::string> candidates;  // exactly kCandidates
  int correct_index = 0;

  static constexpr int kCandidates = 20;
  void validate() const;
};

/// {"context": "...", "candidates": [...20...], "correct": idx} per line.
std::vector<RankingExample> load_ranking_jsonl(const std::string& path);
void save_ranking_jsonl(const std::string& path, const std::vector<RankingExample>& examples);

/// Style-transfer example files reuse the conversation JSONL schema.
std::vector<StyleTransferExample> load_style_examples_jsonl(const std::string& path);
void save_style_examples_jsonl(const std::string& path,
                               const std::vector<StyleTransferExample>& examples);

}  // namespace f2r

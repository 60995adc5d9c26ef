#pragma once

#include <array>
#include <string>
#include <vector>

#include "f2r/common.hpp"

namespace f2r {

enum class Speaker { kHuman, kBot };

enum class Style : int { kNatural = 0, kFeedback = 1 };

inline int style_value(Style s) { return static_cast<int>(s); }
Style style_from_int(int v);
Style flipped(Style s);

struct Turn {
  Speaker speaker;
  std::string text;  // nonempty after trimming; sanitized by the loaders
};

/// One dialogue: ordered context turns plus the utterance that closes it.
struct Conversation {
  std::vector<Turn> turns;
  std::string final_response;
  Style style = Style::kNatural;
};

struct StyleTransferExample {
  std::vector<Turn> history;
  std::string response;
  Style style = Style::kNatural;
};

/// Rewrites reserved delimiter tokens embedded in raw text so they can never
/// collide with the real delimiters, e.g. "[RES]" -> "[_res_]". Matching is
/// case-insensitive.
std::string sanitize_text(const std::string& text);

/// Collapses whitespace runs to single spaces and trims both ends.
std::string normalize_whitespace(const std::string& text);

/// Lowercases, splits on whitespace, separates punctuation into its own
/// tokens. The reserved bracket delimiters survive as atomic tokens.
std::vector<std::string> tokenize_text(const std::string& text);

/// Space-joins tokens; the inverse of tokenize_text on token-normalized text.
std::string join_tokens(const std::vector<std::string>& tokens);

/// Token <-> id bijection with a fixed block of reserved ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kP1 = 4;
  static constexpr int kP2 = 5;
  static constexpr int kRes = 6;
  static constexpr int kStyle0 = 7;
  static constexpr int kStyle1 = 8;
  static constexpr int kReservedCount = 9;

  Vocab();

  /// Builds a vocabulary from tokenized text, most frequent first.
  /// max_size == 0 means unbounded.
  static Vocab build(const std::vector<std::string>& texts, std::size_t max_size = 0,
                     std::size_t min_count = 1);

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  /// Appends a non-reserved token if absent; returns its id.
  int add_token(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  // Linear probing over a sorted index keeps load/save order canonical.
  std::vector<int> sorted_;  // token indices sorted by string
  void rebuild_index();
  int lookup(const std::string& token) const;
};

/// Split ratios plus the seed that fixes subsampling and shuffling.
struct SplitSpec {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StyleCorpus {
  std::vector<StyleTransferExample> train;
  std::vector<StyleTransferExample> valid;
  std::vector<StyleTransferExample> test;
};

/// Window the last n_turns turns and join with delimiters:
/// "[P1] t_k [P2] t_{k+1} ... [RES] final_response". [P1] always marks the
/// first turn of the selected window. Texts are sanitized and
/// token-normalized.
std::string assemble_context(const Conversation& conv, int n_turns);

/// Context half of assemble_context (no [RES], no response); used wherever a
/// history string is needed on its own.
std::string assemble_history(const std::vector<Turn>& turns, int n_turns);

/// Balances the two corpora (uniform seeded subsample of the larger dialogue
/// side), then splits each class by the spec ratios and interleaves. Splits
/// are deterministic under the seed and class-balanced within one example.
StyleCorpus build_style_corpus(const std::vector<Conversation>& dialogue,
                               const std::vector<Conversation>& feedback, const SplitSpec& spec);

}  // namespace f2r

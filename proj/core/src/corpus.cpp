#include "f2r/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

namespace f2r {

namespace {

const std::array<const char*, 3> kDelimiters = {"[P1]", "[P2]", "[RES]"};
const std::array<const char*, 3> kDelimiterEscapes = {"[_p1_]", "[_p2_]", "[_res_]"};

const std::array<const char*, Vocab::kReservedCount> kReservedTokens = {
    "<pad>", "<bos>", "<eos>", "<unk>", "[P1]", "[P2]", "[RES]", "<style0>", "<style1>"};

bool is_punct_token_char(char c) {
  switch (c) {
    case '.':
    case ',':
    case '!':
    case '?':
    case ';':
    case ':':
    case '(':
    case ')':
    case '[':
    case ']':
    case '{':
    case '}':
    case '"':
      return true;
    default:
      return false;
  }
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool iequal_at(const std::string& s, std::size_t pos, const char* pat) {
  std::size_t n = std::strlen(pat);
  if (pos + n > s.size()) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (ascii_lower(s[pos + i]) != ascii_lower(pat[i])) return false;
  }
  return true;
}

}  // namespace

Style style_from_int(int v) {
  if (v != 0 && v != 1) throw Error("style label must be 0 or 1, got " + std::to_string(v));
  return v == 0 ? Style::kNatural : Style::kFeedback;
}

Style flipped(Style s) { return s == Style::kNatural ? Style::kFeedback : Style::kNatural; }

std::string sanitize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool replaced = false;
    for (std::size_t d = 0; d < kDelimiters.size(); ++d) {
      if (iequal_at(text, i, kDelimiters[d])) {
        out += kDelimiterEscapes[d];
        i += std::strlen(kDelimiters[d]);
        replaced = true;
        break;
      }
    }
    if (!replaced) out += text[i++];
  }
  return out;
}

std::string normalize_whitespace(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // swallow leading whitespace
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
    } else {
      if (in_space && !out.empty()) out += ' ';
      out += c;
      in_space = false;
    }
  }
  return out;
}

std::vector<std::string> tokenize_text(const std::string& text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&]() {
    if (!word.empty()) {
      tokens.push_back(word);
      word.clear();
    }
  };
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched_reserved = false;
    for (const char* delim : kDelimiters) {
      const std::size_t n = std::strlen(delim);
      if (text.compare(i, n, delim) == 0) {
        flush();
        tokens.emplace_back(delim);
        i += n;
        matched_reserved = true;
        break;
      }
    }
    if (matched_reserved) continue;
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_punct_token_char(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else {
      word += ascii_lower(c);
    }
    ++i;
  }
  flush();
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() {
  for (const char* t : kReservedTokens) tokens_.emplace_back(t);
  rebuild_index();
}

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t max_size,
                   std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> order;  // first-seen order breaks frequency ties
  for (const auto& text : texts) {
    for (auto& tok : tokenize_text(sanitize_text(text))) {
      auto it = counts.find(tok);
      if (it == counts.end()) {
        counts.emplace(tok, 1);
        order.push_back(tok);
      } else {
        ++it->second;
      }
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return counts[a] > counts[b];
  });
  Vocab v;
  for (const auto& tok : order) {
    if (counts[tok] < min_count) continue;
    if (max_size > 0 && static_cast<std::size_t>(v.size()) >= max_size) break;
    v.add_token(tok);
  }
  return v;
}

void Vocab::rebuild_index() {
  sorted_.resize(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) sorted_[i] = static_cast<int>(i);
  std::sort(sorted_.begin(), sorted_.end(),
            [this](int a, int b) { return tokens_[a] < tokens_[b]; });
}

int Vocab::lookup(const std::string& token) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), token,
                             [this](int idx, const std::string& t) { return tokens_[idx] < t; });
  if (it != sorted_.end() && tokens_[*it] == token) return *it;
  return -1;
}

int Vocab::id(const std::string& token) const {
  const int idx = lookup(token);
  return idx < 0 ? kUnk : idx;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw Error("Vocab: id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(const std::string& token) const { return lookup(token) >= 0; }

int Vocab::add_token(const std::string& token) {
  const int existing = lookup(token);
  if (existing >= 0) return existing;
  tokens_.push_back(token);
  rebuild_index();
  return size() - 1;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& tok : tokenize_text(text)) ids.push_back(id(tok));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> toks;
  toks.reserve(ids.size());
  for (int i : ids) toks.push_back(token(i));
  return join_tokens(toks);
}

void Vocab::save(const std::string& path) const {
  nlohmann::json j;
  j["tokens"] = tokens_;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("Vocab: cannot open '" + path + "' for writing");
  os << j.dump(2) << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("Vocab: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("Vocab: bad file '" + path + "': " + e.what());
  }
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < kReservedCount) throw Error("Vocab: file is missing reserved tokens");
  for (int i = 0; i < kReservedCount; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kReservedTokens[static_cast<std::size_t>(i)]) {
      throw Error("Vocab: reserved token mismatch at id " + std::to_string(i));
    }
  }
  Vocab v;
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) v.add_token(tokens[i]);
  return v;
}

void SplitSpec::validate() const {
  if (train <= 0 || valid <= 0 || test <= 0) throw Error("SplitSpec: ratios must be positive");
  if (std::abs(train + valid + test - 1.0) > 1e-9) throw Error("SplitSpec: ratios must sum to 1");
}

std::string assemble_context(const Conversation& conv, int n_turns) {
  std::string history = assemble_history(conv.turns, n_turns);
  std::string resp = join_tokens(tokenize_text(sanitize_text(conv.final_response)));
  std::string out = history;
  if (!out.empty()) out += ' ';
  out += "[RES]";
  if (!resp.empty()) out += ' ' + resp;
  return out;
}

std::string assemble_history(const std::vector<Turn>& turns, int n_turns) {
  if (n_turns < 1) throw Error("assemble_history: n_turns must be >= 1");
  const std::size_t take = std::min<std::size_t>(turns.size(), static_cast<std::size_t>(n_turns));
  const std::size_t first = turns.size() - take;
  std::string out;
  int slot = 0;
  for (std::size_t i = first; i < turns.size(); ++i) {
    const std::string text = join_tokens(tokenize_text(sanitize_text(turns[i].text)));
    if (text.empty()) continue;  // keeps delimiters non-adjacent
    if (!out.empty()) out += ' ';
    out += (slot % 2 == 0) ? "[P1]" : "[P2]";
    out += ' ' + text;
    ++slot;
  }
  return out;
}

namespace {

std::array<std::size_t, 3> split_counts(std::size_t n, const SplitSpec& spec) {
  const std::array<double, 3> ratios = {spec.train, spec.valid, spec.test};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[static_cast<std::size_t>(i)] * static_cast<double>(n);
    counts[static_cast<std::size_t>(i)] = static_cast<std::size_t>(exact);
    frac[static_cast<std::size_t>(i)] = exact - static_cast<double>(counts[static_cast<std::size_t>(i)]);
    assigned += counts[static_cast<std::size_t>(i)];
  }
  // Largest remainder gets the leftovers; ties resolve train, valid, test.
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (frac[static_cast<std::size_t>(i)] > frac[static_cast<std::size_t>(best)] + 1e-12) best = i;
    }
    ++counts[static_cast<std::size_t>(best)];
    frac[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }
  return counts;
}

StyleTransferExample to_example(const Conversation& c) {
  StyleTransferExample ex;
  ex.history = c.turns;
  ex.response = c.final_response;
  ex.style = c.style;
  return ex;
}

}  // namespace

StyleCorpus build_style_corpus(const std::vector<Conversation>& dialogue,
                               const std::vector<Conversation>& feedback, const SplitSpec& spec) {
  spec.validate();
  if (feedback.empty()) throw Error("build_style_corpus: feedback corpus is empty");
  if (dialogue.size() < feedback.size()) {
    throw Error("build_style_corpus: dialogue corpus must be at least as large as feedback");
  }

  Rng rng = make_rng(spec.seed);

  // Uniform subsample of the dialogue side down to the feedback size.
  std::vector<std::size_t> dial_idx(dialogue.size());
  for (std::size_t i = 0; i < dial_idx.size(); ++i) dial_idx[i] = i;
  std::shuffle(dial_idx.begin(), dial_idx.end(), rng);
  dial_idx.resize(feedback.size());
  std::sort(dial_idx.begin(), dial_idx.end());

  std::vector<StyleTransferExample> natural;
  natural.reserve(feedback.size());
  for (std::size_t i : dial_idx) {
    auto ex = to_example(dialogue[i]);
    ex.style = Style::kNatural;
    natural.push_back(std::move(ex));
  }
  std::vector<StyleTransferExample> fb;
  fb.reserve(feedback.size());
  for (const auto& c : feedback) {
    auto ex = to_example(c);
    ex.style = Style::kFeedback;
    fb.push_back(std::move(ex));
  }

  std::shuffle(natural.begin(), natural.end(), rng);
  std::shuffle(fb.begin(), fb.end(), rng);

  const auto counts = split_counts(natural.size(), spec);

  StyleCorpus out;
  auto emit = [&](std::vector<StyleTransferExample>& dst, std::size_t first, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      dst.push_back(natural[first + i]);
      dst.push_back(fb[first + i]);
    }
    std::shuffle(dst.begin(), dst.end(), rng);
  };
  emit(out.train, 0, counts[0]);
  emit(out.valid, counts[0], counts[1]);
  emit(out.test, counts[0] + counts[1], counts[2]);
  return out;
}

}  // namespace f2r

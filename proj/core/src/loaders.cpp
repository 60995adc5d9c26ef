#include "f2r/loaders.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

namespace f2r {

using nlohmann::json;

namespace {

bool is_persona_line(const std::string& text) {
  const std::string t = normalize_whitespace(text);
  return t.rfind("your persona:", 0) == 0 || t.rfind("partner's persona:", 0) == 0 ||
         t.rfind("partners persona:", 0) == 0;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

/// Splits a ParlAI text field on escaped newlines.
std::vector<std::string> split_escaped_newlines(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == 'n') {
      parts.push_back(cur);
      cur.clear();
      ++i;
    } else {
      cur += s[i];
    }
  }
  parts.push_back(cur);
  return parts;
}

Turn make_turn(Speaker speaker, const std::string& raw) {
  return Turn{speaker, sanitize_text(normalize_whitespace(raw))};
}

Conversation conversation_from_json(const json& rec, const std::string& path, std::size_t line_no,
                                    std::optional<Style> default_style) {
  Conversation conv;
  if (!rec.contains("turns") || !rec["turns"].is_array() || rec["turns"].empty()) {
    throw ParseError(path, line_no, "record needs a nonempty 'turns' array");
  }
  if (!rec.contains("response") || !rec["response"].is_string()) {
    throw ParseError(path, line_no, "record needs a string 'response'");
  }

  const auto& turns = rec["turns"];
  const bool plain = turns[0].is_string();
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    if (plain) {
      if (!t.is_string()) throw ParseError(path, line_no, "mixed turn encodings");
      // Speakers inferred backwards: the last turn addresses the responder.
      const bool human = ((turns.size() - 1 - i) % 2) == 0;
      conv.turns.push_back(make_turn(human ? Speaker::kHuman : Speaker::kBot, t.get<std::string>()));
    } else {
      if (!t.is_object() || !t.contains("speaker") || !t.contains("text")) {
        throw ParseError(path, line_no, "turn needs 'speaker' and 'text'");
      }
      const std::string sp = t["speaker"].get<std::string>();
      Speaker speaker;
      if (sp == "human") {
        speaker = Speaker::kHuman;
      } else if (sp == "bot") {
        speaker = Speaker::kBot;
      } else {
        throw ParseError(path, line_no, "speaker must be 'human' or 'bot', got '" + sp + "'");
      }
      conv.turns.push_back(make_turn(speaker, t["text"].get<std::string>()));
    }
  }
  // Persona annotations are ignored wholesale.
  std::erase_if(conv.turns, [](const Turn& t) { return is_persona_line(t.text) || t.text.empty(); });
  if (conv.turns.empty()) throw ParseError(path, line_no, "record has no usable turns");

  conv.final_response = sanitize_text(normalize_whitespace(rec["response"].get<std::string>()));
  if (conv.final_response.empty()) throw ParseError(path, line_no, "empty response");

  if (rec.contains("style")) {
    if (!rec["style"].is_number_integer()) throw ParseError(path, line_no, "style must be 0 or 1");
    const int v = rec["style"].get<int>();
    if (v != 0 && v != 1) throw ParseError(path, line_no, "style must be 0 or 1");
    conv.style = style_from_int(v);
  } else if (default_style) {
    conv.style = *default_style;
  } else {
    throw ParseError(path, line_no, "record has no 'style' and no default was given");
  }
  return conv;
}

std::vector<Conversation> load_jsonl(const std::string& path, std::optional<Style> default_style) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<Conversation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    out.push_back(conversation_from_json(rec, path, line_no, default_style));
  }
  if (out.empty()) throw Error("'" + path + "' contains no records");
  return out;
}

struct ParlaiLine {
  std::string text;
  std::string labels;
  bool episode_done = false;
};

ParlaiLine parse_parlai_line(const std::string& line, const std::string& path,
                             std::size_t line_no) {
  ParlaiLine out;
  std::size_t start = 0;
  // Leading "N " example numbers (fbdialog flavor) are tolerated.
  while (start < line.size() && std::isdigit(static_cast<unsigned char>(line[start]))) ++start;
  if (start < line.size() && line[start] == ' ') {
    ++start;
  } else {
    start = 0;
  }
  std::size_t pos = start;
  while (pos <= line.size()) {
    std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) tab = line.size();
    const std::string field = line.substr(pos, tab - pos);
    pos = tab + 1;
    if (field.empty()) {
      if (pos > line.size()) break;
      continue;
    }
    const std::size_t colon = field.find(':');
    if (colon == std::string::npos) {
      throw ParseError(path, line_no, "field without key: '" + field + "'");
    }
    const std::string key = field.substr(0, colon);
    const std::string value = field.substr(colon + 1);
    if (key == "text") {
      out.text = value;
    } else if (key == "labels" || key == "label") {
      out.labels = value;
    } else if (key == "episode_done") {
      out.episode_done = (value == "True" || value == "true" || value == "1");
    }
    // ids, rewards and candidate lists are not needed here.
    if (tab == line.size()) break;
  }
  return out;
}

std::vector<Conversation> load_parlai(const std::string& path, std::optional<Style> default_style) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  const Style style = default_style.value_or(Style::kNatural);

  std::vector<Conversation> out;
  std::vector<Turn> episode;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const ParlaiLine pl = parse_parlai_line(line, path, line_no);
    if (pl.text.empty() && pl.labels.empty()) {
      throw ParseError(path, line_no, "exchange carries neither text nor labels");
    }

    for (const auto& part : split_escaped_newlines(pl.text)) {
      const std::string t = trim(part);
      if (t.empty() || is_persona_line(t)) continue;
      episode.push_back(make_turn(Speaker::kHuman, t));
    }
    if (!pl.labels.empty()) {
      // Multiple labels are '|'-separated; the first is the canonical one.
      std::string label = pl.labels.substr(0, pl.labels.find('|'));
      label = trim(label);
      if (!label.empty() && !episode.empty()) {
        Conversation conv;
        conv.turns = episode;
        conv.final_response = sanitize_text(normalize_whitespace(label));
        conv.style = style;
        out.push_back(std::move(conv));
        episode.push_back(make_turn(Speaker::kBot, label));
      }
    }
    if (pl.episode_done) episode.clear();
  }
  if (out.empty()) throw Error("'" + path + "' contains no usable exchanges");

  // The loader contract: alternate speakers. The flattened episode already
  // interleaves asker text and responder labels; fix up parity.
  for (auto& conv : out) {
    for (std::size_t i = 0; i < conv.turns.size(); ++i) {
      const bool human = ((conv.turns.size() - 1 - i) % 2) == 0;
      conv.turns[i].speaker = human ? Speaker::kHuman : Speaker::kBot;
    }
  }
  return out;
}

}  // namespace

CorpusFormat corpus_format_from_string(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "parlai" || name == "parlai_text") return CorpusFormat::kParlaiText;
  throw Error("unknown corpus format '" + name + "' (expected jsonl|parlai)");
}

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& message)
    : Error(path + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::vector<Conversation> load_dialogue_corpus(const std::string& path, CorpusFormat format,
                                               std::optional<Style> default_style) {
  switch (format) {
    case CorpusFormat::kJsonl:
      return load_jsonl(path, default_style);
    case CorpusFormat::kParlaiText:
      return load_parlai(path, default_style);
  }
  throw Error("unreachable corpus format");
}

namespace {

json conversation_to_json(const Conversation& c) {
  json turns = json::array();
  for (const auto& t : c.turns) {
    turns.push_back({{"speaker", t.speaker == Speaker::kHuman ? "human" : "bot"},
                     {"text", t.text}});
  }
  return json{{"turns", turns}, {"response", c.final_response}, {"style", style_value(c.style)}};
}

}  // namespace

void save_conversations_jsonl(const std::string& path, const std::vector<Conversation>& convs) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& c : convs) os << conversation_to_json(c).dump() << "\n";
}

void RankingExample::validate() const {
  if (static_cast<int>(candidates.size()) != kCandidates) {
    throw Error("RankingExample: expected " + std::to_string(kCandidates) + " candidates, got " +
                std::to_string(candidates.size()));
  }
  if (correct_index < 0 || correct_index >= kCandidates) {
    throw Error("RankingExample: correct index out of range");
  }
  const auto& gold = candidates[static_cast<std::size_t>(correct_index)];
  const auto dup = std::count(candidates.begin(), candidates.end(), gold);
  if (dup != 1) throw Error("RankingExample: correct candidate must appear exactly once");
}

std::vector<RankingExample> load_ranking_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  std::vector<RankingExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    RankingExample ex;
    try {
      ex.context = rec.at("context").get<std::string>();
      ex.candidates = rec.at("candidates").get<std::vector<std::string>>();
      ex.correct_index = rec.at("correct").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, std::string("bad ranking record: ") + e.what());
    }
    try {
      ex.validate();
    } catch (const Error& e) {
      throw ParseError(path, line_no, e.what());
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw Error("'" + path + "' contains no records");
  return out;
}

void save_ranking_jsonl(const std::string& path, const std::vector<RankingExample>& examples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& ex : examples) {
    os << json{{"context", ex.context}, {"candidates", ex.candidates}, {"correct", ex.correct_index}}
              .dump()
       << "\n";
  }
}

std::vector<StyleTransferExample> load_style_examples_jsonl(const std::string& path) {
  const auto convs = load_jsonl(path, std::nullopt);
  std::vector<StyleTransferExample> out;
  out.reserve(convs.size());
  for (const auto& c : convs) {
    out.push_back(StyleTransferExample{c.turns, c.final_response, c.style});
  }
  return out;
}

void save_style_examples_jsonl(const std::string& path,
                               const std::vector<StyleTransferExample>& examples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& ex : examples) {
    Conversation c{ex.history, ex.response, ex.style};
    os << conversation_to_json(c).dump() << "\n";
  }
}

}  // namespace f2r

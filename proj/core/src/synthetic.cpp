#include "f2r/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

namespace f2r {

namespace {

// Slot pools. Words are screened so no response contains the choice-marker
// substrings ("if", "not", "whether"), second-person pronouns, or a leading
// about/me/that, all of which would break the oracle inversion.
const std::vector<std::string> kGreetings = {"hi",        "hello",       "hey there",
                                             "good morning", "good evening", "hey"};

const std::vector<std::string> kAges = {"19", "21", "24", "26", "28", "30", "33", "35",
                                        "38", "40", "45", "52", "57", "60", "63", "70"};
const std::vector<std::string> kColors = {"red", "blue", "green", "purple", "orange", "yellow",
                                          "pink"};
const std::vector<std::string> kFoods = {"pizza", "pasta", "sushi", "tacos", "soup",
                                         "salad", "cake",  "curry", "bread", "cheese"};
const std::vector<std::string> kDrinks = {"tea", "coffee", "juice", "cocoa", "lemonade", "water"};
const std::vector<std::string> kSeasons = {"summer", "autumn", "spring", "winter"};
const std::vector<std::string> kGames = {"soccer", "tennis", "golf",  "hockey",
                                         "chess",  "cards",  "checkers", "baseball"};
const std::vector<std::string> kMusic = {"jazz", "rock", "reggae", "blues", "metal"};
const std::vector<std::string> kAnimals = {"dog", "cat", "horse", "rabbit", "turtle", "bird"};
const std::vector<std::string> kSports = {"soccer", "tennis", "hockey", "golf", "rugby",
                                          "cricket"};
const std::vector<std::string> kCounts = {"two", "three", "four"};
const std::vector<std::string> kPets = {"dogs", "cats", "birds", "rabbits", "turtles",
                                        "hamsters"};
const std::vector<std::string> kJobs = {"teacher", "doctor", "chef",   "farmer", "writer",
                                        "nurse",   "lawyer", "barber", "painter"};
const std::vector<std::string> kPlaces = {"boston", "paris",  "tokyo",  "texas",
                                          "canada", "london", "madrid", "dublin"};
const std::vector<std::string> kVerbs = {"run", "swim", "read", "dance", "cook", "paint", "hike",
                                         "sing"};
const std::vector<std::string> kTimes = {"day", "morning", "weekend", "sunday"};

// Fillers the appendix rule cascade strips exactly. The bool selects the
// content transformation: false keeps the response verbatim ("you should
// have said i am 30"), true recasts it into second person ("you should say
// you are 30"), mirroring the two registers real feedback mixes.
const std::vector<std::pair<std::string, bool>> kCoveredFillers = {
    {"you should have said", false},
    {"you could have said", false},
    {"say that", false},
    {"you should say", true},
    {"you could say", true},
    {"tell me", true},
    {"you should have told me", true},
    {"you should have answered", true}};

// Rewrite-style fillers the cascade cannot fully undo.
const std::vector<std::pair<std::string, bool>> kUncoveredFillers = {{"i want to hear", true},
                                                                     {"maybe go with", false}};

struct TemplateDef {
  int id;
  std::string question;
  // response pattern pieces around one or two slots
  std::vector<std::pair<std::string, std::string>> render;  // (response, key) precomputed
};

std::vector<TemplateDef> build_templates() {
  std::vector<TemplateDef> defs;
  int id = 0;

  auto add = [&](const std::string& question, std::vector<std::string> responses) {
    TemplateDef d;
    d.id = id++;
    d.question = question;
    for (auto& r : responses) d.render.emplace_back(r, "");
    defs.push_back(std::move(d));
  };

  std::vector<std::string> rs;
  for (const auto& n : kAges) rs.push_back("i am " + n + " years old");
  add("how old are you", rs);

  rs.clear();
  const std::vector<std::pair<std::string, const std::vector<std::string>*>> cats = {
      {"color", &kColors}, {"food", &kFoods},   {"drink", &kDrinks}, {"season", &kSeasons},
      {"game", &kGames},   {"music", &kMusic},  {"animal", &kAnimals}, {"sport", &kSports}};
  for (const auto& [cat, pool] : cats) {
    TemplateDef d;
    d.id = id++;
    d.question = "what is your favorite " + cat;
    for (const auto& item : *pool) d.render.emplace_back("my favorite " + cat + " is " + item, "");
    defs.push_back(std::move(d));
  }

  rs.clear();
  for (const auto& f : kFoods) rs.push_back("i like " + f);
  add("what foods do you like", rs);

  {
    TemplateDef d;
    d.id = id++;
    d.question = "";  // question carries the slot
    for (const auto& g : kGames) {
      d.render.emplace_back("yes i play " + g, "do you play " + g);
    }
    defs.push_back(std::move(d));
  }

  rs.clear();
  for (const auto& c : kCounts) {
    for (const auto& p : kPets) rs.push_back("i have " + c + " " + p);
  }
  add("do you have any pets", rs);

  rs.clear();
  for (const auto& j : kJobs) rs.push_back("i work as a " + j);
  add("what do you do for work", rs);

  rs.clear();
  for (const auto& p : kPlaces) rs.push_back("i live in " + p);
  add("where do you live", rs);

  {
    TemplateDef d;
    d.id = id++;
    d.question = "";
    for (const auto& v : kVerbs) {
      for (const auto& t : kTimes) {
        d.render.emplace_back("yes i " + v + " every " + t, "do you " + v + " often");
      }
    }
    defs.push_back(std::move(d));
  }

  rs.clear();
  for (const auto& j : kJobs) rs.push_back("i am a " + j);
  add("what do you do for a living", rs);

  return defs;
}

struct ResponseEntry {
  std::string response;
  std::string question;
  int template_id;
};

std::vector<ResponseEntry> build_response_table() {
  std::vector<ResponseEntry> out;
  for (const auto& def : build_templates()) {
    for (const auto& [resp, q] : def.render) {
      out.push_back(ResponseEntry{resp, q.empty() ? def.question : q, def.id});
    }
  }
  return out;
}

std::vector<Turn> make_history(const std::string& greeting, const std::string& question) {
  return {Turn{Speaker::kBot, greeting}, Turn{Speaker::kHuman, question}};
}

}  // namespace

std::string pronoun_forward(const std::string& response) {
  static const std::vector<std::pair<std::string, std::string>> kForward = {
      {"i am ", "you are "}, {"i've ", "you've "}, {"i was", "you were"},
      {"my ", "your "},      {"i ", "you "},
  };
  std::string out;
  out.reserve(response.size());
  std::size_t i = 0;
  while (i < response.size()) {
    bool matched = false;
    for (const auto& [from, to] : kForward) {
      if (response.compare(i, from.size(), from) == 0) {
        out += to;
        i += from.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += response[i++];
  }
  return out;
}

const OracleEntry* SyntheticCorpus::find_oracle(const std::string& feedback) const {
  auto it = oracle.find(feedback);
  return it == oracle.end() ? nullptr : &it->second;
}

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.pairs_per_class < 1) throw Error("synthetic: pairs_per_class must be >= 1");
  Rng rng = derive_rng(spec.seed, "synthetic");
  const auto table = build_response_table();

  std::vector<std::pair<std::string, bool>> fillers = kCoveredFillers;
  if (spec.include_uncovered) {
    fillers.insert(fillers.end(), kUncoveredFillers.begin(), kUncoveredFillers.end());
  }
  std::set<std::string> covered;
  for (const auto& [f, fwd] : kCoveredFillers) covered.insert(f);

  std::uniform_int_distribution<std::size_t> pick_resp(0, table.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_greet(0, kGreetings.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_filler(0, fillers.size() - 1);

  SyntheticCorpus out;

  for (int i = 0; i < spec.pairs_per_class; ++i) {
    const ResponseEntry& re = table[pick_resp(rng)];
    const auto& [filler, forward] = fillers[pick_filler(rng)];
    SyntheticScenario sc;
    sc.history = make_history(kGreetings[pick_greet(rng)], re.question);
    sc.response = re.response;
    sc.filler = filler;
    sc.feedback = filler + " " + (forward ? pronoun_forward(re.response) : re.response);
    sc.template_id = re.template_id;
    sc.rule_covered = covered.count(filler) > 0;
    out.feedback_scenarios.push_back(std::move(sc));
  }
  for (int i = 0; i < spec.pairs_per_class; ++i) {
    const ResponseEntry& re = table[pick_resp(rng)];
    SyntheticScenario sc;
    sc.history = make_history(kGreetings[pick_greet(rng)], re.question);
    sc.response = re.response;
    sc.template_id = re.template_id;
    out.natural_scenarios.push_back(std::move(sc));
  }

  for (const auto& sc : out.feedback_scenarios) {
    auto it = out.oracle.find(sc.feedback);
    if (it == out.oracle.end()) {
      out.oracle.emplace(sc.feedback, OracleEntry{sc.response, sc.filler, sc.rule_covered});
    } else if (it->second.response != sc.response) {
      throw Error("synthetic: feedback collision for '" + sc.feedback + "'");
    }
  }

  std::set<std::string> seen;
  for (const auto& re : table) {
    if (seen.insert(re.response).second) {
      out.response_pool.emplace_back(re.response, re.template_id);
    }
  }

  // Reuse the corpus splitter so balance/determinism behave identically to
  // the real pipeline.
  std::vector<Conversation> natural_convs, feedback_convs;
  for (const auto& sc : out.natural_scenarios) {
    natural_convs.push_back(Conversation{sc.history, sc.response, Style::kNatural});
  }
  for (const auto& sc : out.feedback_scenarios) {
    feedback_convs.push_back(Conversation{sc.history, sc.feedback, Style::kFeedback});
  }
  SplitSpec split = spec.split;
  if (split.seed == 0) split.seed = spec.seed;
  out.style = build_style_corpus(natural_convs, feedback_convs, split);
  return out;
}

std::vector<RankingExample> make_ranking_examples(
    const std::vector<StyleTransferExample>& naturals,
    const std::vector<std::pair<std::string, int>>& response_pool, int n_turns,
    std::uint64_t seed) {
  Rng rng = derive_rng(seed, "ranking-eval");
  std::map<std::string, int> template_of;
  for (const auto& [resp, tid] : response_pool) template_of[resp] = tid;

  std::vector<RankingExample> out;
  for (const auto& ex : naturals) {
    if (ex.style != Style::kNatural) continue;
    auto it = template_of.find(ex.response);
    const int gold_template = it == template_of.end() ? -1 : it->second;

    std::vector<std::string> distractor_pool;
    for (const auto& [resp, tid] : response_pool) {
      if (resp != ex.response && tid != gold_template) distractor_pool.push_back(resp);
    }
    if (static_cast<int>(distractor_pool.size()) < RankingExample::kCandidates - 1) {
      throw Error("make_ranking_examples: distractor pool too small");
    }
    std::shuffle(distractor_pool.begin(), distractor_pool.end(), rng);

    RankingExample re;
    re.context = assemble_history(ex.history, n_turns);
    re.candidates.assign(distractor_pool.begin(),
                         distractor_pool.begin() + (RankingExample::kCandidates - 1));
    std::uniform_int_distribution<int> pos(0, RankingExample::kCandidates - 1);
    re.correct_index = pos(rng);
    re.candidates.insert(re.candidates.begin() + re.correct_index, ex.response);
    re.validate();
    out.push_back(std::move(re));
  }
  return out;
}

double token_overlap_f1(const std::vector<std::string>& predicted,
                        const std::vector<std::string>& reference) {
  if (predicted.empty() || reference.empty()) return 0.0;
  std::map<std::string, int> ref_counts;
  for (const auto& t : reference) ++ref_counts[t];
  int overlap = 0;
  for (const auto& t : predicted) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(predicted.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(reference.size());
  return 2.0 * precision * recall / (precision + recall);
}

double token_overlap_f1(const std::string& predicted, const std::string& reference) {
  return token_overlap_f1(tokenize_text(predicted), tokenize_text(reference));
}

void save_oracle_jsonl(const std::string& path, const SyntheticCorpus& corpus) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  for (const auto& [feedback, entry] : corpus.oracle) {
    os << nlohmann::json{{"feedback", feedback},
                         {"oracle", entry.response},
                         {"filler", entry.filler},
                         {"rule_covered", entry.rule_covered}}
              .dump()
       << "\n";
  }
}

std::map<std::string, OracleEntry> load_oracle_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  std::map<std::string, OracleEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      out[rec.at("feedback").get<std::string>()] =
          OracleEntry{rec.at("oracle").get<std::string>(), rec.value("filler", std::string{}),
                      rec.value("rule_covered", true)};
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, std::string("bad oracle record: ") + e.what());
    }
  }
  if (out.empty()) throw Error("'" + path + "' contains no records");
  return out;
}

}  // namespace f2r

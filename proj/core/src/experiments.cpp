#include "f2r/experiments.hpp"

#include <cstdio>
#include <fstream>

#include "f2r/heuristic.hpp"

namespace f2r {

Setting setting_from_string(const std::string& name) {
  if (name == "NOFEEDBACK" || name == "nofeedback") return Setting::kNoFeedback;
  if (name == "FEEDBACK" || name == "feedback") return Setting::kFeedback;
  if (name == "HEURISTIC" || name == "heuristic") return Setting::kHeuristic;
  if (name == "FEED2RESP" || name == "feed2resp") return Setting::kFeed2Resp;
  throw Error("unknown setting '" + name +
              "' (expected NOFEEDBACK|FEEDBACK|HEURISTIC|FEED2RESP)");
}

std::string setting_to_string(Setting s) {
  switch (s) {
    case Setting::kNoFeedback:
      return "NOFEEDBACK";
    case Setting::kFeedback:
      return "FEEDBACK";
    case Setting::kHeuristic:
      return "HEURISTIC";
    case Setting::kFeed2Resp:
      return "FEED2RESP";
  }
  throw Error("unreachable setting");
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double variance_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

nlohmann::json SettingReport::to_json() const {
  return {{"setting", setting},
          {"seeds", seeds},
          {"dev", {{"per_seed", dev_hits}, {"mean", dev_mean}, {"variance", dev_variance}}},
          {"test", {{"per_seed", test_hits}, {"mean", test_mean}, {"variance", test_variance}}},
          {"train_pairs", train_pairs}};
}

std::string convert_with_generator(const Generator& gen, const Vocab& vocab,
                                   const StyleTransferExample& feedback, int n_turns,
                                   int max_len, double repetition_penalty,
                                   const EncodeCaps& caps) {
  std::vector<EncodedExample> enc = encode_examples(vocab, {feedback}, n_turns, caps);
  if (enc.empty()) throw Error("convert: feedback example has no tokens");
  const auto out =
      gen.generate(enc[0].response, enc[0].history, Style::kNatural, max_len, repetition_penalty);
  if (out.empty()) return feedback.response;  // degenerate decode falls back to the input
  return vocab.decode(out);
}

std::vector<RankingPair> build_setting_pairs(Setting setting, const ExperimentData& data,
                                             const ExperimentSpec& spec,
                                             const Generator* converter) {
  if (setting == Setting::kFeed2Resp && converter == nullptr) {
    throw Error("FEED2RESP needs a trained converter checkpoint");
  }
  std::vector<RankingPair> pairs;
  for (const auto& ex : data.style.train) {
    if (ex.style != Style::kNatural) continue;
    pairs.push_back(RankingPair{assemble_history(ex.history, spec.n_turns), ex.response});
  }
  if (setting == Setting::kNoFeedback) return pairs;

  for (const auto& ex : data.style.train) {
    if (ex.style != Style::kFeedback) continue;
    RankingPair p;
    p.context = assemble_history(ex.history, spec.n_turns);
    switch (setting) {
      case Setting::kFeedback:
        p.response = ex.response;
        break;
      case Setting::kHeuristic:
        p.response = heuristic_convert(ex.response);
        break;
      case Setting::kFeed2Resp:
        p.response = convert_with_generator(*converter, data.vocab, ex, spec.n_turns,
                                            spec.max_len, spec.repetition_penalty, spec.caps);
        break;
      case Setting::kNoFeedback:
        break;
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

SettingReport run_setting(const ExperimentSpec& spec, const ExperimentData& data,
                          const Generator* converter) {
  if (spec.seeds.empty()) throw Error("run_setting: need at least one seed");
  const auto pairs = build_setting_pairs(spec.setting, data, spec, converter);

  SettingReport report;
  report.setting = setting_to_string(spec.setting);
  report.seeds = spec.seeds;
  report.train_pairs = pairs.size();

  RankerConfig rcfg = spec.ranker;
  rcfg.vocab_size = data.vocab.size();

  for (std::uint64_t seed : spec.seeds) {
    Ranker ranker(rcfg, seed);
    RankerTrainConfig tcfg = spec.ranker_train;
    tcfg.seed = seed;
    train_ranker(ranker, data.vocab, pairs, tcfg);
    const Scorer scorer = make_ranker_scorer(ranker, data.vocab);
    report.dev_hits.push_back(hits_at_k(scorer, data.dev_eval, 1));
    report.test_hits.push_back(hits_at_k(scorer, data.test_eval, 1));
  }
  report.dev_mean = mean_of(report.dev_hits);
  report.dev_variance = variance_of(report.dev_hits);
  report.test_mean = mean_of(report.test_hits);
  report.test_variance = variance_of(report.test_hits);
  return report;
}

void write_reports_csv(const std::string& path, const std::vector<SettingReport>& reports) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << "setting,split,mean,variance\n";
  char buf[160];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,dev,%.9g,%.9g\n", r.setting.c_str(), r.dev_mean,
                  r.dev_variance);
    os << buf;
    std::snprintf(buf, sizeof(buf), "%s,test,%.9g,%.9g\n", r.setting.c_str(), r.test_mean,
                  r.test_variance);
    os << buf;
  }
}

}  // namespace f2r

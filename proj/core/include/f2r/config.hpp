#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "f2r/discriminator.hpp"
#include "f2r/experiments.hpp"
#include "f2r/generator.hpp"
#include "f2r/ranker.hpp"
#include "f2r/trainer.hpp"

namespace f2r {

/// Structured run configuration. Every field has a documented default;
/// unknown keys anywhere in the file are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  int n_turns = 2;
  EncodeCaps caps;
  std::size_t vocab_max_size = 0;
  std::size_t vocab_min_count = 1;

  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  PretrainConfig pretrain;
  TrainConfig training;
  RankerConfig ranker;
  RankerTrainConfig ranker_training;
  SyntheticSpec synthetic;
  ExperimentSpec experiment;

  /// Canonical JSON of the effective configuration (defaults filled in).
  nlohmann::json to_json() const;
  /// Stable fingerprint of to_json() for manifests.
  std::string config_hash() const;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  static RunConfig defaults();
};

/// Desk-scale profile: small models that train in seconds to minutes. The
/// plain defaults carry the full-scale hyperparameters instead.
RunConfig desk_scale_config();

}  // namespace f2r

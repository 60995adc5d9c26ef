#pragma once

#include <string>
#include <vector>

#include "f2r/corpus.hpp"
#include "f2r/discriminator.hpp"
#include "f2r/generator.hpp"

namespace f2r::testing {

/// Vocabulary with exactly 20 entries (9 reserved + 11 words); the size the
/// gradient suite pins.
inline Vocab vocab20() {
  return Vocab::build({"yes no ok the a fine good day cat dog sun"});
}

/// 2-layer / 16-dim generator over a 20-token vocabulary.
inline GeneratorConfig tiny_generator_config(int vocab_size = 20) {
  GeneratorConfig c;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.heads = 2;
  c.token_dim = c.style_dim = c.pos_dim = c.hidden = 16;
  c.vocab_size = vocab_size;
  c.max_positions = 48;
  return c;
}

inline DiscriminatorConfig tiny_discriminator_config(int vocab_size = 20) {
  DiscriminatorConfig c;
  c.layers = 2;
  c.heads = 2;
  c.token_dim = c.style_dim = c.pos_dim = c.hidden = 16;
  c.vocab_size = vocab_size;
  c.max_positions = 48;
  return c;
}

inline void zero_params(ParamStore& store) {
  for (Tensor* t : store.all()) t->value.setZero();
}

inline std::vector<int> random_ids(int len, int vocab_size, Rng& rng) {
  std::uniform_int_distribution<int> pick(Vocab::kReservedCount, vocab_size - 1);
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) ids.push_back(pick(rng));
  return ids;
}

}  // namespace f2r::testing

#pragma once

#include <vector>

#include "f2r/ad.hpp"
#include "f2r/common.hpp"

namespace f2r {

/// A sentence as per-position probability distributions over the vocabulary.
/// Row t is the distribution for position t; every row sums to 1.
struct SoftSequence {
  ad::Matrix probs;  // length x vocab

  int length() const { return static_cast<int>(probs.rows()); }
  int vocab() const { return static_cast<int>(probs.cols()); }

  /// Verifies rows are distributions (entries >= 0, rows sum to 1 within tol).
  void validate(double tol = 1e-6) const;

  /// argmax per position.
  std::vector<int> hard_tokens() const;

  static SoftSequence one_hot(const std::vector<int>& ids, int vocab);
};

/// Drops trailing PAD ids and truncates after the first EOS (EOS kept).
/// Losses and encoders apply this uniformly, which is what makes padded and
/// unpadded encodings of the same sentence equivalent.
std::vector<int> trim_sequence(const std::vector<int>& ids, int pad_id, int eos_id);

}  // namespace f2r

#pragma once

#include <vector>

#include "f2r/params.hpp"

namespace f2r {

/// Adam with decoupled weight decay. Used for the converter and the style
/// classifier.
class AdamW {
 public:
  explicit AdamW(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  void step(ParamStore& params);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

/// Adamax (infinity-norm Adam variant). Used for the ranking models.
class Adamax {
 public:
  explicit Adamax(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamStore& params);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ad::Matrix> m_, u_;
};

}  // namespace f2r

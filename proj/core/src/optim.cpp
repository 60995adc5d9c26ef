#include "f2r/optim.hpp"

#include <cmath>

namespace f2r {

AdamW::AdamW(double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(ParamStore& params) {
  auto tensors = params.all();
  if (m_.empty()) {
    for (Tensor* t : tensors) {
      m_.push_back(ad::Matrix::Zero(t->value.rows(), t->value.cols()));
      v_.push_back(ad::Matrix::Zero(t->value.rows(), t->value.cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& t = *tensors[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * t.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * t.grad.cwiseProduct(t.grad);
    const ad::Matrix mhat = m_[i] / bc1;
    const ad::Matrix vhat = v_[i] / bc2;
    t.value -= lr_ * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    if (weight_decay_ > 0.0) t.value -= lr_ * weight_decay_ * t.value;
  }
}

Adamax::Adamax(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adamax::step(ParamStore& params) {
  auto tensors = params.all();
  if (m_.empty()) {
    for (Tensor* t : tensors) {
      m_.push_back(ad::Matrix::Zero(t->value.rows(), t->value.cols()));
      u_.push_back(ad::Matrix::Zero(t->value.rows(), t->value.cols()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& t = *tensors[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * t.grad;
    u_[i] = (beta2_ * u_[i]).cwiseMax(t.grad.cwiseAbs());
    t.value -= (lr_ / bc1) * (m_[i].array() / (u_[i].array() + eps_)).matrix();
  }
}

}  // namespace f2r

#include "f2r/ad.hpp"

#include <cmath>
#include <stdexcept>

namespace f2r::ad {

namespace {

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

Matrix stable_softmax_rows(const Matrix& a) {
  Matrix p(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    p.row(r) = (a.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::logic_error("ad::Tape: invalid Var handle");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tape::Node& Tape::node(Var v) { return const_cast<Node&>(static_cast<const Tape*>(this)->node(v)); }

Var Tape::push(Matrix value, bool requires_grad, Pullback pullback) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.pullback = requires_grad ? std::move(pullback) : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::gbuf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Var Tape::add(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw std::logic_error("ad::add: shape mismatch");
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(va + vb, rg, [this, a, b](const Node& self) {
    if (requires_grad(a)) gbuf(a.id) += self.grad;
    if (requires_grad(b)) gbuf(b.id) += self.grad;
  });
}

Var Tape::sub(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw std::logic_error("ad::sub: shape mismatch");
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(va - vb, rg, [this, a, b](const Node& self) {
    if (requires_grad(a)) gbuf(a.id) += self.grad;
    if (requires_grad(b)) gbuf(b.id) -= self.grad;
  });
}

Var Tape::add_rowwise(Var a, Var row) {
  const Matrix& va = value(a);
  const Matrix& vr = value(row);
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw std::logic_error("ad::add_rowwise: row must be 1 x cols(a)");
  }
  const bool rg = requires_grad(a) || requires_grad(row);
  Matrix v = va;
  v.rowwise() += vr.row(0);
  return push(std::move(v), rg, [this, a, row](const Node& self) {
    if (requires_grad(a)) gbuf(a.id) += self.grad;
    if (requires_grad(row)) gbuf(row.id) += self.grad.colwise().sum();
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, requires_grad(a), [this, a, s](const Node& self) {
    gbuf(a.id) += self.grad * s;
  });
}

Var Tape::hadamard(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.rows() != vb.rows() || va.cols() != vb.cols()) {
    throw std::logic_error("ad::hadamard: shape mismatch");
  }
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(va.cwiseProduct(vb), rg, [this, a, b](const Node& self) {
    if (requires_grad(a)) gbuf(a.id) += self.grad.cwiseProduct(value(b));
    if (requires_grad(b)) gbuf(b.id) += self.grad.cwiseProduct(value(a));
  });
}

Var Tape::log(Var a) {
  return push(value(a).array().log().matrix(), requires_grad(a), [this, a](const Node& self) {
    gbuf(a.id) += self.grad.cwiseQuotient(value(a));
  });
}

Var Tape::clamp_min(Var a, double lo) {
  return push(value(a).cwiseMax(lo), requires_grad(a), [this, a, lo](const Node& self) {
    const Matrix& v = value(a);
    Matrix& ga = gbuf(a.id);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        if (v(i, j) > lo) ga(i, j) += self.grad(i, j);
      }
    }
  });
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.rows()) throw std::logic_error("ad::matmul: inner dimension mismatch");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(va * vb, rg, [this, a, b](const Node& self) {
    if (requires_grad(a)) gbuf(a.id) += self.grad * value(b).transpose();
    if (requires_grad(b)) gbuf(b.id) += value(a).transpose() * self.grad;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  if (va.cols() != vb.cols()) throw std::logic_error("ad::matmul_nt: inner dimension mismatch");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(va * vb.transpose(), rg, [this, a, b](const Node& self) {
    if (requires_grad(a)) gbuf(a.id) += self.grad * value(b);
    if (requires_grad(b)) gbuf(b.id) += self.grad.transpose() * value(a);
  });
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
  const Matrix& vt = value(table);
  Matrix v(static_cast<Eigen::Index>(ids.size()), vt.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= vt.rows()) throw std::logic_error("ad::gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(k)) = vt.row(ids[k]);
  }
  return push(std::move(v), requires_grad(table),
              [this, table, ids = std::move(ids)](const Node& self) {
    Matrix& gt = gbuf(table.id);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      gt.row(ids[k]) += self.grad.row(static_cast<Eigen::Index>(k));
    }
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::logic_error("ad::concat_rows: empty input");
  Eigen::Index rows = 0;
  const Eigen::Index cols = value(parts[0]).cols();
  bool rg = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw std::logic_error("ad::concat_rows: column mismatch");
    rows += value(p).rows();
    rg = rg || requires_grad(p);
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  return push(std::move(v), rg, [this, parts](const Node& self) {
    Eigen::Index at2 = 0;
    for (Var p : parts) {
      const Eigen::Index r = value(p).rows();
      if (requires_grad(p)) gbuf(p.id) += self.grad.middleRows(at2, r);
      at2 += r;
    }
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::logic_error("ad::concat_cols: empty input");
  Eigen::Index cols = 0;
  const Eigen::Index rows = value(parts[0]).rows();
  bool rg = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw std::logic_error("ad::concat_cols: row mismatch");
    cols += value(p).cols();
    rg = rg || requires_grad(p);
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    v.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  return push(std::move(v), rg, [this, parts](const Node& self) {
    Eigen::Index at2 = 0;
    for (Var p : parts) {
      const Eigen::Index c = value(p).cols();
      if (requires_grad(p)) gbuf(p.id) += self.grad.middleCols(at2, c);
      at2 += c;
    }
  });
}

Var Tape::slice_rows(Var a, int first, int count) {
  const Matrix& va = value(a);
  if (first < 0 || count < 0 || first + count > va.rows()) {
    throw std::logic_error("ad::slice_rows: range out of bounds");
  }
  return push(va.middleRows(first, count), requires_grad(a),
              [this, a, first, count](const Node& self) {
    gbuf(a.id).middleRows(first, count) += self.grad;
  });
}

Var Tape::slice_cols(Var a, int first, int count) {
  const Matrix& va = value(a);
  if (first < 0 || count < 0 || first + count > va.cols()) {
    throw std::logic_error("ad::slice_cols: range out of bounds");
  }
  return push(va.middleCols(first, count), requires_grad(a),
              [this, a, first, count](const Node& self) {
    gbuf(a.id).middleCols(first, count) += self.grad;
  });
}

Var Tape::gather_coeffs(Var a, std::vector<std::pair<int, int>> rc) {
  const Matrix& va = value(a);
  Matrix v(static_cast<Eigen::Index>(rc.size()), 1);
  for (std::size_t k = 0; k < rc.size(); ++k) {
    const auto [r, c] = rc[k];
    if (r < 0 || r >= va.rows() || c < 0 || c >= va.cols()) {
      throw std::logic_error("ad::gather_coeffs: index out of range");
    }
    v(static_cast<Eigen::Index>(k), 0) = va(r, c);
  }
  return push(std::move(v), requires_grad(a), [this, a, rc = std::move(rc)](const Node& self) {
    Matrix& ga = gbuf(a.id);
    for (std::size_t k = 0; k < rc.size(); ++k) {
      ga(rc[k].first, rc[k].second) += self.grad(static_cast<Eigen::Index>(k), 0);
    }
  });
}

Var Tape::sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = value(a).sum();
  return push(std::move(v), requires_grad(a), [this, a](const Node& self) {
    gbuf(a.id).array() += self.grad(0, 0);
  });
}

Var Tape::mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  Matrix v(1, 1);
  v(0, 0) = value(a).sum() / n;
  return push(std::move(v), requires_grad(a), [this, a, n](const Node& self) {
    gbuf(a.id).array() += self.grad(0, 0) / n;
  });
}

Var Tape::softmax_rows(Var a) {
  Matrix p = stable_softmax_rows(value(a));
  return push(std::move(p), requires_grad(a), [this, a](const Node& self) {
    const Matrix& p2 = self.value;
    Matrix& ga = gbuf(a.id);
    for (Eigen::Index r = 0; r < p2.rows(); ++r) {
      const double dot = self.grad.row(r).dot(p2.row(r));
      ga.row(r) += p2.row(r).cwiseProduct((self.grad.row(r).array() - dot).matrix());
    }
  });
}

Var Tape::log_softmax_rows(Var a) {
  const Matrix& va = value(a);
  Matrix v(va.rows(), va.cols());
  for (Eigen::Index r = 0; r < va.rows(); ++r) {
    const double m = va.row(r).maxCoeff();
    const double lse = m + std::log((va.row(r).array() - m).exp().sum());
    v.row(r) = va.row(r).array() - lse;
  }
  return push(std::move(v), requires_grad(a), [this, a](const Node& self) {
    const Matrix p = self.value.array().exp().matrix();
    Matrix& ga = gbuf(a.id);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      ga.row(r) += self.grad.row(r) - p.row(r) * self.grad.row(r).sum();
    }
  });
}

Var Tape::gelu(Var a) {
  Matrix v = value(a).unaryExpr([](double x) { return gelu_value(x); });
  return push(std::move(v), requires_grad(a), [this, a](const Node& self) {
    gbuf(a.id) += self.grad.cwiseProduct(
        value(a).unaryExpr([](double x) { return gelu_derivative(x); }));
  });
}

Var Tape::layer_norm_rows(Var a, Var gain, Var bias) {
  const Matrix& va = value(a);
  const Matrix& vg = value(gain);
  const Matrix& vb = value(bias);
  if (vg.rows() != 1 || vb.rows() != 1 || vg.cols() != va.cols() || vb.cols() != va.cols()) {
    throw std::logic_error("ad::layer_norm_rows: gain/bias must be 1 x cols(a)");
  }
  const Eigen::Index d = va.cols();
  Matrix xhat(va.rows(), d);
  Eigen::VectorXd inv_std(va.rows());
  for (Eigen::Index r = 0; r < va.rows(); ++r) {
    const double mu = va.row(r).mean();
    const double var = (va.row(r).array() - mu).square().sum() / static_cast<double>(d);
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (va.row(r).array() - mu) * inv_std(r);
  }
  Matrix v(va.rows(), d);
  for (Eigen::Index r = 0; r < va.rows(); ++r) {
    v.row(r) = xhat.row(r).cwiseProduct(vg.row(0)) + vb.row(0);
  }
  const bool rg = requires_grad(a) || requires_grad(gain) || requires_grad(bias);
  return push(std::move(v), rg,
              [this, a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std),
               d](const Node& self) {
    const Matrix& g = self.grad;
    const Matrix& vg2 = value(gain);
    if (requires_grad(gain)) {
      Matrix& gg = gbuf(gain.id);
      for (Eigen::Index r = 0; r < g.rows(); ++r) gg.row(0) += g.row(r).cwiseProduct(xhat.row(r));
    }
    if (requires_grad(bias)) {
      gbuf(bias.id) += g.colwise().sum();
    }
    if (requires_grad(a)) {
      Matrix& ga = gbuf(a.id);
      const double dn = static_cast<double>(d);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const Eigen::RowVectorXd dxhat = g.row(r).cwiseProduct(vg2.row(0));
        const double s1 = dxhat.sum();
        const double s2 = dxhat.dot(xhat.row(r));
        ga.row(r) +=
            inv_std(r) * (dxhat.array() - s1 / dn - xhat.row(r).array() * (s2 / dn)).matrix();
      }
    }
  });
}

void Tape::backward(Var root) {
  const Node& r = node(root);
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw std::logic_error("ad::backward: root must be a 1x1 scalar");
  }
  if (!r.requires_grad) return;
  gbuf(root.id)(0, 0) += 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.requires_grad && n.pullback && has_grad(i)) n.pullback(n);
  }
}

}  // namespace f2r::ad

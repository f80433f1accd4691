#pragma once

#include "hyperflow/common.hpp"

#include <string>
#include <vector>

namespace hyperflow {

enum class Activation { relu, sigmoid, tanh, identity };

inline Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ConfigError("unknown activation: " + name);
}

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
  }
  return z;
}

/// Multiplies the upstream gradient by f'(z). The rectifier uses subgradient 0 at the kink.
inline Matrix activation_backward(Activation a, const Matrix& z, const Matrix& upstream) {
  switch (a) {
    case Activation::relu: return (z.array() > 0.0).cast<double>().cwiseProduct(upstream.array()).matrix();
    case Activation::sigmoid: {
      const Matrix s = activate(Activation::sigmoid, z);
      return (s.array() * (1.0 - s.array()) * upstream.array()).matrix();
    }
    case Activation::tanh: {
      const Matrix t = z.array().tanh().matrix();
      return ((1.0 - t.array().square()) * upstream.array()).matrix();
    }
    case Activation::identity: return upstream;
  }
  return upstream;
}

inline Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = (2.0 * uniform_unit(rng) - 1.0) * limit;
  return m;
}

/// Adaptive-moment gradient descent over a fixed list of tensors.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
    require(params.size() == grads.size(), "Adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * *grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i]->cwiseAbs2();
      params[i]->array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Plain gradient descent with the same interface as Adam.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] -= lr_ * *grads[i];
  }

 private:
  double lr_;
};

}  // namespace hyperflow

#ifndef WDA_OPTIM_HPP_
#define WDA_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "wda/layers.hpp"

namespace wda::nn {

// State buffers index into the same parameter order used at construction;
// both optimizers serialize those buffers for exact training resumption.

template <typename T>
class SgdMomentum {
 public:
  SgdMomentum() = default;
  explicit SgdMomentum(const std::vector<Param<T>*>& params, double momentum)
      : momentum_(momentum) {
    for (const Param<T>* p : params) vel_.emplace_back(p->size(), T(0));
  }

  void step(const std::vector<Param<T>*>& params, double lr) {
    for (size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      std::vector<T>& v = vel_[i];
      for (size_t j = 0; j < p.size(); ++j) {
        v[j] = T(momentum_) * v[j] + p.g[j];
        p.w[j] -= T(lr) * v[j];
      }
    }
  }

  std::vector<std::vector<T>>& state() { return vel_; }

 private:
  double momentum_ = 0.9;
  std::vector<std::vector<T>> vel_;
};

template <typename T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(const std::vector<Param<T>*>& params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Param<T>* p : params) {
      m_.emplace_back(p->size(), T(0));
      v_.emplace_back(p->size(), T(0));
    }
  }

  void step(const std::vector<Param<T>*>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      for (size_t j = 0; j < p.size(); ++j) {
        const double g = double(p.g[j]);
        m_[i][j] = T(beta1_ * m_[i][j] + (1.0 - beta1_) * g);
        v_[i][j] = T(beta2_ * v_[i][j] + (1.0 - beta2_) * g * g);
        const double mhat = m_[i][j] / bc1;
        const double vhat = v_[i][j] / bc2;
        p.w[j] -= T(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::vector<std::vector<T>>& state_m() { return m_; }
  std::vector<std::vector<T>>& state_v() { return v_; }
  int64_t& steps() { return t_; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

}  // namespace wda::nn

#endif  // WDA_OPTIM_HPP_

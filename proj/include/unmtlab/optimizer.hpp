#pragma once

#include <cmath>
#include <vector>

#include <unmtlab/graph.hpp>

namespace unmtlab::nn {

struct OptimizerConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double clip = 5.0;   // global gradient norm clip
  int warmup = 400;    // inverse-sqrt schedule warmup steps
};

// Adam over the registered trainable parameters. Frozen tensors (the token
// embeddings) are never registered, so they cannot move.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Param<T>*> params, OptimizerConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      p->ensure_grad();
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }

  double learning_rate() const {
    double t = static_cast<double>(step_ + 1);
    double w = static_cast<double>(cfg_.warmup);
    return cfg_.lr * std::min(t / w, std::sqrt(w / t));
  }

  // Applies one update and zeroes gradients. Returns the pre-clip grad norm.
  double step() {
    double sq = 0.0;
    for (auto* p : params_) {
      p->ensure_grad();
      for (const T& g : p->grad.data) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    double norm = std::sqrt(sq);
    double scale = (cfg_.clip > 0 && norm > cfg_.clip) ? cfg_.clip / norm : 1.0;

    const double lr = learning_rate();
    ++step_;
    bias1_ *= cfg_.beta1;
    bias2_ *= cfg_.beta2;
    const double c1 = 1.0 / (1.0 - bias1_);
    const double c2 = 1.0 / (1.0 - bias2_);

    for (size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      T* w = p->value.ptr();
      T* g = p->grad.ptr();
      T* m = m_[i].ptr();
      T* v = v_[i].ptr();
      const size_t n = p->value.size();
      for (size_t j = 0; j < n; ++j) {
        double gj = static_cast<double>(g[j]) * scale;
        double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj;
        double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        w[j] -= static_cast<T>(lr * (mj * c1) / (std::sqrt(vj * c2) + cfg_.eps));
        g[j] = T(0);
      }
    }
    return norm;
  }

  int64_t steps_taken() const { return step_; }

 private:
  std::vector<Param<T>*> params_;
  OptimizerConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  int64_t step_ = 0;
  double bias1_ = 1.0, bias2_ = 1.0;
};

}  // namespace unmtlab::nn

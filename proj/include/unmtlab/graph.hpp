#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/kernels.hpp>
#include <unmtlab/tensor.hpp>

namespace unmtlab::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  void ensure_grad() {
    if (grad.rows != value.rows || grad.cols != value.cols) grad.resize(value.rows, value.cols);
  }
};

// Padded batch geometry: B sentences of padded length len with true lengths.
struct SeqLayout {
  int batch = 0;
  int len = 0;
  std::vector<int32_t> lengths;
};

// Eager reverse-mode tape over 2D tensors. Ops append nodes; backward() walks
// the tape in reverse creation order. Parameters are not nodes: ops that
// touch a Param accumulate straight into its grad.
template <typename T>
class Graph {
 public:
  using Var = int;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void(Graph&)> backprop;  // may be empty for leaves
  };

  std::vector<Node> nodes;

  Var make(Tensor<T> value) {
    nodes.push_back(Node{std::move(value), {}, {}});
    return static_cast<Var>(nodes.size() - 1);
  }

  Tensor<T>& val(Var v) { return nodes[static_cast<size_t>(v)].value; }
  const Tensor<T>& val(Var v) const { return nodes[static_cast<size_t>(v)].value; }

  Tensor<T>& grad(Var v) {
    auto& n = nodes[static_cast<size_t>(v)];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols)
      n.grad.resize(n.value.rows, n.value.cols);
    return n.grad;
  }

  void set_backprop(Var v, std::function<void(Graph&)> fn) {
    nodes[static_cast<size_t>(v)].backprop = std::move(fn);
  }

  // ----- ops -----

  Var input(Tensor<T> value) { return make(std::move(value)); }

  // rows of a frozen table summed with rows of a trainable position table
  Var embed_sum(const Tensor<T>& frozen_tok, Param<T>& pos, const std::vector<int32_t>& token_ids,
                const std::vector<int32_t>& positions) {
    const size_t n = token_ids.size();
    const size_t d = frozen_tok.cols;
    Tensor<T> out(n, d);
    for (size_t r = 0; r < n; ++r) {
      const T* te = frozen_tok.row(static_cast<size_t>(token_ids[r]));
      const T* pe = pos.value.row(static_cast<size_t>(positions[r]));
      T* o = out.row(r);
      for (size_t j = 0; j < d; ++j) o[j] = te[j] + pe[j];
    }
    Var v = make(std::move(out));
    std::vector<int32_t> pos_copy = positions;
    set_backprop(v, [v, &pos, pos_copy](Graph& g) {
      if (!pos.trainable) return;
      pos.ensure_grad();
      const Tensor<T>& gv = g.grad(v);
      for (size_t r = 0; r < gv.rows; ++r)
        kernels::axpy_span(pos.grad.row(static_cast<size_t>(pos_copy[r])), T(1), gv.row(r), gv.cols);
    });
    return v;
  }

  // y = x W^T + b, W: [out, in]
  Var linear(Var x, Param<T>& W, Param<T>& b) {
    const Tensor<T>& xv = val(x);
    const size_t n = xv.rows, in = xv.cols, out = W.value.rows;
    Tensor<T> y(n, out);
    kernels::matmul_nt(y.ptr(), xv.ptr(), W.value.ptr(), n, out, in);
    for (size_t r = 0; r < n; ++r) kernels::axpy_span(y.row(r), T(1), b.value.row(0), out);
    Var v = make(std::move(y));
    set_backprop(v, [v, x, &W, &b](Graph& g) {
      const Tensor<T>& gy = g.grad(v);
      const Tensor<T>& xv2 = g.val(x);
      const size_t n2 = xv2.rows, in2 = xv2.cols, out2 = W.value.rows;
      // dW += gy^T x
      W.ensure_grad();
      kernels::matmul_tn(W.grad.ptr(), gy.ptr(), xv2.ptr(), out2, in2, n2, /*accumulate=*/true);
      // db += column sums of gy
      b.ensure_grad();
      for (size_t r = 0; r < n2; ++r) kernels::axpy_span(b.grad.row(0), T(1), gy.row(r), out2);
      // dx += gy W
      Tensor<T>& gx = g.grad(x);
      kernels::matmul_nn(gx.ptr(), gy.ptr(), W.value.ptr(), n2, in2, out2, /*accumulate=*/true);
    });
    return v;
  }

  Var add(Var a, Var b) {
    const Tensor<T>& av = val(a);
    const Tensor<T>& bv = val(b);
    Tensor<T> y = av;
    for (size_t i = 0; i < y.size(); ++i) y.data[i] += bv.data[i];
    Var v = make(std::move(y));
    set_backprop(v, [v, a, b](Graph& g) {
      const Tensor<T>& gy = g.grad(v);
      Tensor<T>& ga = g.grad(a);
      Tensor<T>& gb = g.grad(b);
      for (size_t i = 0; i < gy.size(); ++i) {
        ga.data[i] += gy.data[i];
        gb.data[i] += gy.data[i];
      }
    });
    return v;
  }

  Var relu(Var a) {
    Tensor<T> y = val(a);
    for (auto& x : y.data) x = x > T(0) ? x : T(0);
    Var v = make(std::move(y));
    set_backprop(v, [v, a](Graph& g) {
      const Tensor<T>& gy = g.grad(v);
      const Tensor<T>& yv = g.val(v);
      Tensor<T>& ga = g.grad(a);
      for (size_t i = 0; i < gy.size(); ++i)
        if (yv.data[i] > T(0)) ga.data[i] += gy.data[i];
    });
    return v;
  }

  // Inverted dropout; mask kept for the backward pass.
  Var dropout(Var a, double p, Rng& rng, bool train) {
    if (!train || p <= 0.0) return a;
    const Tensor<T>& av = val(a);
    Tensor<T> mask(av.rows, av.cols);
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    for (auto& m : mask.data) m = rng.bernoulli(p) ? T(0) : keep_scale;
    Tensor<T> y = av;
    for (size_t i = 0; i < y.size(); ++i) y.data[i] *= mask.data[i];
    Var v = make(std::move(y));
    auto mask_holder = std::make_shared<Tensor<T>>(std::move(mask));
    set_backprop(v, [v, a, mask_holder](Graph& g) {
      const Tensor<T>& gy = g.grad(v);
      Tensor<T>& ga = g.grad(a);
      for (size_t i = 0; i < gy.size(); ++i) ga.data[i] += gy.data[i] * mask_holder->data[i];
    });
    return v;
  }

  Var layer_norm(Var a, Param<T>& gain, Param<T>& bias, T eps = T(1e-5)) {
    const Tensor<T>& av = val(a);
    const size_t n = av.rows, d = av.cols;
    Tensor<T> y(n, d);
    auto inv_std = std::make_shared<std::vector<T>>(n);
    auto xhat = std::make_shared<Tensor<T>>(n, d);
    for (size_t r = 0; r < n; ++r) {
      const T* x = av.row(r);
      T mean = T(0);
      for (size_t j = 0; j < d; ++j) mean += x[j];
      mean /= static_cast<T>(d);
      T var = T(0);
      for (size_t j = 0; j < d; ++j) var += (x[j] - mean) * (x[j] - mean);
      var /= static_cast<T>(d);
      T inv = T(1) / std::sqrt(var + eps);
      (*inv_std)[r] = inv;
      T* xh = xhat->row(r);
      T* yr = y.row(r);
      const T* g0 = gain.value.row(0);
      const T* b0 = bias.value.row(0);
      for (size_t j = 0; j < d; ++j) {
        xh[j] = (x[j] - mean) * inv;
        yr[j] = xh[j] * g0[j] + b0[j];
      }
    }
    Var v = make(std::move(y));
    set_backprop(v, [v, a, &gain, &bias, inv_std, xhat](Graph& g) {
      const Tensor<T>& gy = g.grad(v);
      Tensor<T>& ga = g.grad(a);
      gain.ensure_grad();
      bias.ensure_grad();
      const size_t n2 = gy.rows, d2 = gy.cols;
      const T* g0 = gain.value.row(0);
      for (size_t r = 0; r < n2; ++r) {
        const T* dy = gy.row(r);
        const T* xh = xhat->row(r);
        T* dgain = gain.grad.row(0);
        T* dbias = bias.grad.row(0);
        T sum_dyg = T(0), sum_dyg_xh = T(0);
        for (size_t j = 0; j < d2; ++j) {
          dgain[j] += dy[j] * xh[j];
          dbias[j] += dy[j];
          T dyg = dy[j] * g0[j];
          sum_dyg += dyg;
          sum_dyg_xh += dyg * xh[j];
        }
        T inv = (*inv_std)[r];
        T* dx = ga.row(r);
        T mean_dyg = sum_dyg / static_cast<T>(d2);
        T mean_dyg_xh = sum_dyg_xh / static_cast<T>(d2);
        for (size_t j = 0; j < d2; ++j)
          dx[j] += inv * (dy[j] * g0[j] - mean_dyg - xh[j] * mean_dyg_xh);
      }
    });
    return v;
  }

  // Multi-head scaled dot-product attention. q is [B*Tq, d]; k and v are
  // [B*Tk, d]. Key padding always applies; causal additionally limits self
  // attention to the prefix. Padded query rows are skipped and stay zero.
  Var attention(Var q, Var k, Var v, int heads, const SeqLayout& ql, const SeqLayout& kl,
                bool causal) {
    const Tensor<T>& qv = val(q);
    const size_t d = qv.cols;
    const size_t dh = d / static_cast<size_t>(heads);
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    const int B = ql.batch, Tq = ql.len, Tk = kl.len;

    Tensor<T> out(qv.rows, d);
    // attention probabilities, laid out [(b*heads + h) * Tq + i, j]
    auto probs = std::make_shared<Tensor<T>>(static_cast<size_t>(B * heads * Tq),
                                             static_cast<size_t>(Tk));

    const Tensor<T>& kv = val(k);
    const Tensor<T>& vv = val(v);
#pragma omp parallel for schedule(static) num_threads(kernels::g_threads) collapse(2) if (kernels::g_threads > 1)
    for (int b = 0; b < B; ++b) {
      for (int h = 0; h < heads; ++h) {
        const size_t hoff = static_cast<size_t>(h) * dh;
        const int qlen = ql.lengths[static_cast<size_t>(b)];
        const int klen = kl.lengths[static_cast<size_t>(b)];
        for (int i = 0; i < qlen; ++i) {
          const size_t qrow = static_cast<size_t>(b * Tq + i);
          T* prow = probs->row(static_cast<size_t>((b * heads + h) * Tq + i));
          const int jmax = causal ? std::min(klen, i + 1) : klen;
          T maxs = std::numeric_limits<T>::lowest();
          for (int j = 0; j < jmax; ++j) {
            T s = kernels::dot_span(qv.row(qrow) + hoff,
                                    kv.row(static_cast<size_t>(b * Tk + j)) + hoff, dh) *
                  scale;
            prow[j] = s;
            maxs = std::max(maxs, s);
          }
          T sum = T(0);
          for (int j = 0; j < jmax; ++j) {
            T e = std::exp(prow[j] - maxs);
            prow[j] = e;
            sum += e;
          }
          const T inv = T(1) / sum;
          for (int j = 0; j < jmax; ++j) prow[j] *= inv;
          for (int j = jmax; j < Tk; ++j) prow[j] = T(0);
          T* orow = out.row(qrow) + hoff;
          for (int j = 0; j < jmax; ++j)
            kernels::axpy_span(orow, prow[j], vv.row(static_cast<size_t>(b * Tk + j)) + hoff, dh);
        }
      }
    }

    Var y = make(std::move(out));
    SeqLayout qlc = ql, klc = kl;
    set_backprop(y, [y, q, k, v, heads, qlc, klc, causal, probs, scale, dh](Graph& g) {
      const Tensor<T>& gy = g.grad(y);
      const Tensor<T>& qv2 = g.val(q);
      const Tensor<T>& kv2 = g.val(k);
      const Tensor<T>& vv2 = g.val(v);
      Tensor<T>& gq = g.grad(q);
      Tensor<T>& gk = g.grad(k);
      Tensor<T>& gv = g.grad(v);
      const int B = qlc.batch, Tq = qlc.len, Tk = klc.len;
#pragma omp parallel for schedule(static) num_threads(kernels::g_threads) collapse(2) if (kernels::g_threads > 1)
      for (int b = 0; b < B; ++b) {
        for (int h = 0; h < heads; ++h) {
          const size_t hoff = static_cast<size_t>(h) * dh;
          const int qlen = qlc.lengths[static_cast<size_t>(b)];
          const int klen = klc.lengths[static_cast<size_t>(b)];
          std::vector<T> dscore(static_cast<size_t>(Tk));
          for (int i = 0; i < qlen; ++i) {
            const size_t qrow = static_cast<size_t>(b * Tq + i);
            const T* dout = gy.row(qrow) + hoff;
            const T* prow = probs->row(static_cast<size_t>((b * heads + h) * Tq + i));
            const int jmax = causal ? std::min(klen, i + 1) : klen;
            // dA and dV
            T sum_dA_A = T(0);
            for (int j = 0; j < jmax; ++j) {
              const size_t krow = static_cast<size_t>(b * Tk + j);
              T dA = kernels::dot_span(dout, vv2.row(krow) + hoff, dh);
              kernels::axpy_span(gv.row(krow) + hoff, prow[j], dout, dh);
              dscore[static_cast<size_t>(j)] = dA;
              sum_dA_A += dA * prow[j];
            }
            // softmax backward, then dQ/dK
            for (int j = 0; j < jmax; ++j) {
              const size_t krow = static_cast<size_t>(b * Tk + j);
              T ds = prow[j] * (dscore[static_cast<size_t>(j)] - sum_dA_A) * scale;
              kernels::axpy_span(gq.row(qrow) + hoff, ds, kv2.row(krow) + hoff, dh);
              kernels::axpy_span(gk.row(krow) + hoff, ds, qv2.row(qrow) + hoff, dh);
            }
          }
        }
      }
    });
    return y;
  }

  struct CeResult {
    Var loss;         // 1x1 node
    double value = 0; // mean cross-entropy over unmasked targets
    size_t n_tokens = 0;
  };

  // Tied output projection against a frozen embedding table plus a trainable
  // bias, fused with softmax cross-entropy. Masked rows contribute nothing.
  CeResult tied_softmax_ce(Var x, const Tensor<T>& emb, Param<T>& out_bias,
                           const std::vector<int32_t>& targets, const std::vector<uint8_t>& mask) {
    const Tensor<T>& xv = val(x);
    const size_t n = xv.rows, d = xv.cols, V = emb.rows;
    if (targets.size() != n || mask.size() != n)
      throw PipelineError("model", "target/mask shape mismatch in loss");

    size_t n_valid = 0;
    for (uint8_t m : mask) n_valid += m;
    if (n_valid == 0) throw PipelineError("model", "loss over an all-pad target");

    auto logits = std::make_shared<Tensor<T>>(n, V);
    kernels::matmul_nt(logits->ptr(), xv.ptr(), emb.ptr(), n, V, d);
    for (size_t r = 0; r < n; ++r)
      kernels::axpy_span(logits->row(r), T(1), out_bias.value.row(0), V);

    double loss_sum = 0.0;
    // convert logits rows to probabilities in place; accumulate loss
    for (size_t r = 0; r < n; ++r) {
      if (!mask[r]) continue;
      T* row = logits->row(r);
      T maxv = row[0];
      for (size_t j = 1; j < V; ++j) maxv = std::max(maxv, row[j]);
      double sum = 0.0;
      for (size_t j = 0; j < V; ++j) sum += std::exp(static_cast<double>(row[j] - maxv));
      double logz = std::log(sum) + static_cast<double>(maxv);
      loss_sum += logz - static_cast<double>(row[static_cast<size_t>(targets[r])]);
      const T invsum = static_cast<T>(1.0 / sum);
      for (size_t j = 0; j < V; ++j)
        row[j] = std::exp(row[j] - maxv) * invsum;
    }
    const double mean_loss = loss_sum / static_cast<double>(n_valid);

    Tensor<T> scalar(1, 1);
    scalar.at(0, 0) = static_cast<T>(mean_loss);
    Var v = make(std::move(scalar));
    std::vector<int32_t> tcopy = targets;
    std::vector<uint8_t> mcopy = mask;
    set_backprop(v, [v, x, &emb, &out_bias, logits, tcopy, mcopy, n_valid](Graph& g) {
      const T gscale = g.grad(v).at(0, 0) / static_cast<T>(n_valid);
      const size_t n2 = logits->rows, V2 = logits->cols;
      // dlogits = (probs - onehot) * gscale on valid rows, 0 elsewhere
      for (size_t r = 0; r < n2; ++r) {
        T* row = logits->row(r);
        if (!mcopy[r]) {
          for (size_t j = 0; j < V2; ++j) row[j] = T(0);
          continue;
        }
        row[static_cast<size_t>(tcopy[r])] -= T(1);
        for (size_t j = 0; j < V2; ++j) row[j] *= gscale;
      }
      out_bias.ensure_grad();
      for (size_t r = 0; r < n2; ++r)
        kernels::axpy_span(out_bias.grad.row(0), T(1), logits->row(r), V2);
      Tensor<T>& gx = g.grad(x);
      kernels::matmul_nn(gx.ptr(), logits->ptr(), emb.ptr(), n2, gx.cols, V2, /*accumulate=*/true);
    });
    return CeResult{v, mean_loss, n_valid};
  }

  void backward(Var loss) {
    grad(loss).at(0, 0) = T(1);
    for (size_t i = nodes.size(); i > 0; --i) {
      auto& n = nodes[i - 1];
      if (n.backprop && n.grad.rows > 0) n.backprop(*this);
    }
  }
};

}  // namespace unmtlab::nn

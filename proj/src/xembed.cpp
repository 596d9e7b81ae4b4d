#include <unmtlab/xembed.hpp>

#include <unmtlab/kernels.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace unmtlab::xembed {

namespace {

void normalize_row(float* row, size_t d) {
  double sq = 0.0;
  for (size_t j = 0; j < d; ++j) sq += double(row[j]) * double(row[j]);
  double norm = std::sqrt(sq);
  if (norm < 1e-12) return;
  float inv = static_cast<float>(1.0 / norm);
  for (size_t j = 0; j < d; ++j) row[j] *= inv;
}

TensorF normalized_copy(const TensorF& m) {
  TensorF out = m;
  for (size_t r = 0; r < out.rows; ++r) normalize_row(out.row(r), out.cols);
  return out;
}

}  // namespace

TensorF train_skipgram(const std::vector<TokenSeq>& corpus, int32_t vocab_size,
                       const SkipgramConfig& cfg, uint64_t seed) {
  if (corpus.empty()) throw PipelineError("xembed", "empty corpus for skip-gram");
  if (cfg.dim < 2) throw PipelineError("xembed", "embedding dim must be >= 2");
  const size_t V = static_cast<size_t>(vocab_size);
  const size_t d = static_cast<size_t>(cfg.dim);

  Rng rng(derive_seed(seed, "skipgram"));
  TensorF in(V, d), out(V, d);
  for (auto& v : in.data) v = static_cast<float>((rng.uniform() - 0.5) / cfg.dim);
  // output vectors start at zero, as in the reference word2vec scheme

  // unigram^0.75 negative-sampling table via cumulative distribution
  std::vector<int64_t> counts(V, 0);
  int64_t total_tokens = 0;
  for (const auto& sent : corpus)
    for (int32_t t : sent) {
      ++counts[static_cast<size_t>(t)];
      ++total_tokens;
    }
  std::vector<double> cum(V, 0.0);
  double acc = 0.0;
  for (size_t i = 0; i < V; ++i) {
    acc += std::pow(static_cast<double>(counts[i]), 0.75);
    cum[i] = acc;
  }
  if (acc <= 0.0) throw PipelineError("xembed", "no tokens to train embeddings on");
  auto draw_negative = [&]() {
    double r = rng.uniform() * acc;
    return static_cast<int32_t>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
  };

  std::vector<float> grad_center(d);
  const int64_t total_steps = static_cast<int64_t>(cfg.epochs) * total_tokens;
  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& sent : corpus) {
      const int n = static_cast<int>(sent.size());
      for (int i = 0; i < n; ++i, ++step) {
        double lr = cfg.lr * std::max(1e-4, 1.0 - static_cast<double>(step) / total_steps);
        // reduced window as in word2vec: b uniform in [1, window]
        int b = 1 + static_cast<int>(rng.uniform_index(static_cast<size_t>(cfg.window)));
        float* center = in.row(static_cast<size_t>(sent[static_cast<size_t>(i)]));
        for (int off = -b; off <= b; ++off) {
          if (off == 0) continue;
          int j = i + off;
          if (j < 0 || j >= n) continue;
          std::fill(grad_center.begin(), grad_center.end(), 0.0f);
          for (int neg = 0; neg <= cfg.negatives; ++neg) {
            int32_t target;
            float label;
            if (neg == 0) {
              target = sent[static_cast<size_t>(j)];
              label = 1.0f;
            } else {
              target = draw_negative();
              label = 0.0f;
              if (target == sent[static_cast<size_t>(j)]) continue;
            }
            float* ctx = out.row(static_cast<size_t>(target));
            double dot = 0.0;
            for (size_t kdim = 0; kdim < d; ++kdim) dot += double(center[kdim]) * double(ctx[kdim]);
            double sigma = 1.0 / (1.0 + std::exp(-dot));
            float g = static_cast<float>((label - sigma) * lr);
            for (size_t kdim = 0; kdim < d; ++kdim) {
              grad_center[kdim] += g * ctx[kdim];
              ctx[kdim] += g * center[kdim];
            }
          }
          for (size_t kdim = 0; kdim < d; ++kdim) center[kdim] += grad_center[kdim];
        }
      }
    }
  }
  return in;
}

std::vector<std::pair<int32_t, int32_t>> seed_dictionary(
    const std::set<int32_t>& src_tokens, const std::set<int32_t>& tgt_tokens,
    const std::vector<std::pair<int32_t, int32_t>>& oracle_pairs, size_t min_pairs, bool fallback) {
  std::vector<std::pair<int32_t, int32_t>> pairs;
  // identical surface strings share one id under the joint vocabulary
  for (int32_t id : src_tokens)
    if (tgt_tokens.count(id)) pairs.emplace_back(id, id);

  if (pairs.size() < min_pairs) {
    if (!fallback)
      throw PipelineError("xembed",
                          "seed dictionary too small (" + std::to_string(pairs.size()) +
                              " identical-surface pairs) and oracle fallback is disabled");
    for (const auto& p : oracle_pairs) pairs.push_back(p);
  }
  if (pairs.empty()) throw PipelineError("xembed", "empty seed dictionary");
  return pairs;
}

AlignmentMap procrustes_align(const TensorF& embeddings, const TensorF& embeddings_tgt,
                              const std::vector<std::pair<int32_t, int32_t>>& dict) {
  if (dict.empty()) throw PipelineError("xembed", "empty dictionary for Procrustes");
  const size_t d = embeddings.cols;
  TensorF xn = normalized_copy(embeddings);
  TensorF yn = normalized_copy(embeddings_tgt);

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& [si, ti] : dict) {
    const float* x = xn.row(static_cast<size_t>(si));
    const float* y = yn.row(static_cast<size_t>(ti));
    for (size_t a = 0; a < d; ++a)
      for (size_t b = 0; b < d; ++b) m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += double(x[a]) * double(y[b]);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd w = svd.matrixU() * svd.matrixV().transpose();

  AlignmentMap out;
  out.dict_size = dict.size();
  out.w.resize(d, d);
  for (size_t a = 0; a < d; ++a)
    for (size_t b = 0; b < d; ++b)
      out.w.at(a, b) = static_cast<float>(w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));

  double tiny = svd.singularValues()(svd.singularValues().size() - 1);
  out.degenerate_warning = tiny < 1e-9;  // rank-deficient dictionary; solution still valid
  return out;
}

double orthogonality_error(const TensorF& w) {
  const size_t d = w.rows;
  double worst = 0.0;
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < d; ++k) dot += double(w.at(k, i)) * double(w.at(k, j));
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

double procrustes_objective(const TensorF& x, const TensorF& y, const TensorF& w,
                            const std::vector<std::pair<int32_t, int32_t>>& dict) {
  TensorF xn = normalized_copy(x);
  TensorF yn = normalized_copy(y);
  const size_t d = x.cols;
  double total = 0.0;
  std::vector<double> mapped(d);
  for (const auto& [si, ti] : dict) {
    const float* xr = xn.row(static_cast<size_t>(si));
    const float* yr = yn.row(static_cast<size_t>(ti));
    for (size_t b = 0; b < d; ++b) {
      double acc = 0.0;
      for (size_t a = 0; a < d; ++a) acc += double(xr[a]) * double(w.at(a, b));
      mapped[b] = acc;
    }
    for (size_t b = 0; b < d; ++b) total += (mapped[b] - yr[b]) * (mapped[b] - yr[b]);
  }
  return total;
}

std::vector<int32_t> csls_neighbors(const TensorF& x_mapped, const TensorF& y, int k) {
  const size_t nx = x_mapped.rows, ny = y.rows, d = x_mapped.cols;
  TensorF xn = normalized_copy(x_mapped);
  TensorF yn = normalized_copy(y);

  TensorF cos(nx, ny);
  kernels::matmul_nt(cos.ptr(), xn.ptr(), yn.ptr(), nx, ny, d);

  auto mean_topk = [&](const float* row, size_t n) {
    std::vector<float> v(row, row + n);
    size_t kk = std::min<size_t>(static_cast<size_t>(k), n);
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(kk), v.end(),
                      std::greater<float>());
    double s = 0.0;
    for (size_t i = 0; i < kk; ++i) s += v[i];
    return s / static_cast<double>(kk);
  };

  std::vector<double> rx(nx), ry(ny);
  for (size_t i = 0; i < nx; ++i) rx[i] = mean_topk(cos.row(i), ny);
  // column means need a transposed view
  TensorF cos_t(ny, nx);
  for (size_t i = 0; i < nx; ++i)
    for (size_t j = 0; j < ny; ++j) cos_t.at(j, i) = cos.at(i, j);
  for (size_t j = 0; j < ny; ++j) ry[j] = mean_topk(cos_t.row(j), nx);

  std::vector<int32_t> nn(nx, -1);
  for (size_t i = 0; i < nx; ++i) {
    double best = -1e30;
    for (size_t j = 0; j < ny; ++j) {
      double score = 2.0 * double(cos.at(i, j)) - rx[i] - ry[j];
      if (score > best) {
        best = score;
        nn[i] = static_cast<int32_t>(j);
      }
    }
  }
  return nn;
}

AlignmentMap self_learning_refine(const TensorF& embeddings, const std::vector<int32_t>& src_ids,
                                  const std::vector<int32_t>& tgt_ids, const AlignmentMap& w0,
                                  int iters, int csls_k) {
  AlignmentMap current = w0;
  if (iters <= 0) return current;
  const size_t d = embeddings.cols;

  for (int iter = 0; iter < iters; ++iter) {
    // map the source rows through the current W
    TensorF x(src_ids.size(), d), y(tgt_ids.size(), d);
    TensorF xn = normalized_copy(embeddings);
    for (size_t i = 0; i < src_ids.size(); ++i) {
      const float* xr = xn.row(static_cast<size_t>(src_ids[i]));
      for (size_t b = 0; b < d; ++b) {
        double acc = 0.0;
        for (size_t a = 0; a < d; ++a) acc += double(xr[a]) * double(current.w.at(a, b));
        x.at(i, b) = static_cast<float>(acc);
      }
    }
    for (size_t j = 0; j < tgt_ids.size(); ++j) {
      const float* yr = xn.row(static_cast<size_t>(tgt_ids[j]));
      for (size_t b = 0; b < d; ++b) y.at(j, b) = yr[b];
    }

    auto fwd = csls_neighbors(x, y, csls_k);
    auto bwd = csls_neighbors(y, x, csls_k);
    std::vector<std::pair<int32_t, int32_t>> induced;
    for (size_t i = 0; i < fwd.size(); ++i) {
      int32_t j = fwd[i];
      if (j >= 0 && bwd[static_cast<size_t>(j)] == static_cast<int32_t>(i))
        induced.emplace_back(src_ids[i], tgt_ids[static_cast<size_t>(j)]);
    }
    if (induced.empty()) break;  // keep the last map

    AlignmentMap next = procrustes_align(embeddings, embeddings, induced);
    next.refine_iters = iter + 1;
    current = next;
  }
  return current;
}

TensorF export_static_embeddings(const TensorF& embeddings, const AlignmentMap& map,
                                 const std::set<int32_t>& src_tokens, float scale, uint64_t seed) {
  const size_t V = embeddings.rows, d = embeddings.cols;
  TensorF out = normalized_copy(embeddings);

  // source-side rows move into the target-aligned space
  std::vector<double> mapped(d);
  for (int32_t id : src_tokens) {
    float* row = out.row(static_cast<size_t>(id));
    for (size_t b = 0; b < d; ++b) {
      double acc = 0.0;
      for (size_t a = 0; a < d; ++a) acc += double(row[a]) * double(map.w.at(a, b));
      mapped[b] = acc;
    }
    for (size_t b = 0; b < d; ++b) row[b] = static_cast<float>(mapped[b]);
  }

  // specials: small seeded random directions, excluded from alignment
  Rng rng(derive_seed(seed, "special-rows"));
  for (int32_t id = 0; id < Vocab::kNumSpecials; ++id) {
    float* row = out.row(static_cast<size_t>(id));
    for (size_t j = 0; j < d; ++j) row[j] = static_cast<float>(rng.normal() * 0.01);
  }

  for (size_t r = 0; r < V; ++r) {
    float* row = out.row(r);
    double sq = 0.0;
    for (size_t j = 0; j < d; ++j) sq += double(row[j]) * double(row[j]);
    if (sq < 1e-20) {
      // tokens that never occurred: give them a deterministic random direction
      for (size_t j = 0; j < d; ++j) row[j] = static_cast<float>(rng.normal());
      sq = 0.0;
      for (size_t j = 0; j < d; ++j) sq += double(row[j]) * double(row[j]);
    }
    float inv = static_cast<float>(scale / std::sqrt(sq));
    for (size_t j = 0; j < d; ++j) row[j] *= inv;
  }
  return out;
}

void save_embeddings_word2vec(const TensorF& emb, const Vocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("xembed", "cannot write " + path);
  out << emb.rows << ' ' << emb.cols << '\n';
  for (size_t r = 0; r < emb.rows; ++r) {
    out << vocab.decode(static_cast<int32_t>(r));
    for (size_t j = 0; j < emb.cols; ++j) out << ' ' << emb.at(r, j);
    out << '\n';
  }
}

TensorF load_embeddings_word2vec(const Vocab& vocab, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("xembed", "cannot read " + path);
  size_t rows = 0, cols = 0;
  in >> rows >> cols;
  if (rows != static_cast<size_t>(vocab.size()))
    throw PipelineError("xembed", "embedding file row count does not match vocab");
  TensorF emb(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    std::string tok;
    in >> tok;
    int32_t id = vocab.encode(tok);
    for (size_t j = 0; j < cols; ++j) in >> emb.at(static_cast<size_t>(id), j);
  }
  return emb;
}

void save_alignment(const AlignmentMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("xembed", "cannot write " + path);
  out << "# orthogonal alignment map, dict_size=" << map.dict_size
      << " refine_iters=" << map.refine_iters << '\n';
  for (size_t r = 0; r < map.w.rows; ++r) {
    for (size_t j = 0; j < map.w.cols; ++j) {
      if (j) out << ' ';
      out << map.w.at(r, j);
    }
    out << '\n';
  }
}

}  // namespace unmtlab::xembed

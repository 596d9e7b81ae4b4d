#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/graph.hpp>
#include <unmtlab/vocab.hpp>

namespace unmtlab {

struct ModelConfig {
  int enc_layers = 4;
  int dec_layers = 4;
  int heads = 4;
  int d_model = 64;
  int d_ffn = 256;
  int max_positions = 64;
  double dropout = 0.1;
  bool tied_output = true;

  void validate() const {
    if (d_model % heads != 0) throw PipelineError("model", "d_model must be divisible by heads");
    if (enc_layers < 1 || dec_layers < 1 || d_model < 2 || max_positions < 2)
      throw PipelineError("model", "degenerate model configuration");
  }
};

struct EncBatch {
  int batch = 0;
  int len = 0;                      // padded length
  std::vector<int32_t> tokens;      // batch*len, pad_id padded
  std::vector<int32_t> positions;   // batch*len
  std::vector<int32_t> lengths;

  nn::SeqLayout layout() const { return {batch, len, lengths}; }
};

struct DecBatch {
  int batch = 0;
  int len = 0;
  std::vector<int32_t> in_tokens;
  std::vector<int32_t> positions;   // absolute positions (fragment-aware for span objectives)
  std::vector<int32_t> targets;
  std::vector<uint8_t> target_mask;
  std::vector<int32_t> lengths;

  nn::SeqLayout layout() const { return {batch, len, lengths}; }
};

EncBatch make_enc_batch(const std::vector<TokenSeq>& seqs);

// Full-sequence teacher forcing: decoder input is bos + target[:-1], the
// target rows are the sequence itself (callers append eos beforehand).
DecBatch make_dec_batch_full(const std::vector<TokenSeq>& targets);

// Fragment teacher forcing: decoder input is bos + fragment[:-1] with the
// fragment's absolute positions.
DecBatch make_dec_batch_fragment(const std::vector<TokenSeq>& fragments,
                                 const std::vector<std::vector<int>>& positions);

template <typename T>
class TransformerT {
 public:
  struct EncLayer {
    nn::Param<T> ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Param<T> ln2_g, ln2_b, w1, b1, w2, b2;
  };
  struct DecLayer {
    nn::Param<T> ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;          // self
    nn::Param<T> ln2_g, ln2_b, cq, cbq, ck, cbk, cv, cbv, co, cbo;      // cross
    nn::Param<T> ln3_g, ln3_b, w1, b1, w2, b2;                          // ffn
  };

  ModelConfig cfg;
  Tensor<T> tok_emb;  // frozen cross-lingual token embeddings
  uint64_t vocab_fingerprint = 0;
  nn::Param<T> enc_pos, dec_pos, out_bias;
  nn::Param<T> enc_final_g, enc_final_b, dec_final_g, dec_final_b;
  std::vector<EncLayer> enc;
  std::vector<DecLayer> dec;

  static TransformerT build(const ModelConfig& config, const Tensor<T>& embeddings,
                            uint64_t vocab_fp, uint64_t seed) {
    config.validate();
    if (static_cast<int>(embeddings.cols) != config.d_model)
      throw PipelineError("model", "embedding dim does not match d_model");
    TransformerT m;
    m.cfg = config;
    m.tok_emb = embeddings;
    m.vocab_fingerprint = vocab_fp;
    Rng rng(derive_seed(seed, "model-init"));

    auto init_w = [&](nn::Param<T>& p, std::string name, size_t rows, size_t cols) {
      p.name = std::move(name);
      p.value.resize(rows, cols);
      T std_dev = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cols)));
      for (auto& v : p.value.data) v = static_cast<T>(rng.normal()) * std_dev;
    };
    auto init_const = [&](nn::Param<T>& p, std::string name, size_t rows, size_t cols, T fill) {
      p.name = std::move(name);
      p.value.resize(rows, cols, fill);
    };
    auto init_pos = [&](nn::Param<T>& p, std::string name) {
      p.name = std::move(name);
      p.value.resize(static_cast<size_t>(config.max_positions), static_cast<size_t>(config.d_model));
      for (auto& v : p.value.data) v = static_cast<T>(rng.normal() * 0.02);
    };

    const size_t d = static_cast<size_t>(config.d_model);
    const size_t f = static_cast<size_t>(config.d_ffn);
    init_pos(m.enc_pos, "enc_pos");
    init_pos(m.dec_pos, "dec_pos");
    init_const(m.out_bias, "out_bias", 1, embeddings.rows, T(0));
    init_const(m.enc_final_g, "enc_final_g", 1, d, T(1));
    init_const(m.enc_final_b, "enc_final_b", 1, d, T(0));
    init_const(m.dec_final_g, "dec_final_g", 1, d, T(1));
    init_const(m.dec_final_b, "dec_final_b", 1, d, T(0));

    m.enc.resize(static_cast<size_t>(config.enc_layers));
    for (int l = 0; l < config.enc_layers; ++l) {
      auto& L = m.enc[static_cast<size_t>(l)];
      std::string p = "enc" + std::to_string(l) + ".";
      init_const(L.ln1_g, p + "ln1_g", 1, d, T(1));
      init_const(L.ln1_b, p + "ln1_b", 1, d, T(0));
      init_w(L.wq, p + "wq", d, d);
      init_const(L.bq, p + "bq", 1, d, T(0));
      init_w(L.wk, p + "wk", d, d);
      init_const(L.bk, p + "bk", 1, d, T(0));
      init_w(L.wv, p + "wv", d, d);
      init_const(L.bv, p + "bv", 1, d, T(0));
      init_w(L.wo, p + "wo", d, d);
      init_const(L.bo, p + "bo", 1, d, T(0));
      init_const(L.ln2_g, p + "ln2_g", 1, d, T(1));
      init_const(L.ln2_b, p + "ln2_b", 1, d, T(0));
      init_w(L.w1, p + "w1", f, d);
      init_const(L.b1, p + "b1", 1, f, T(0));
      init_w(L.w2, p + "w2", d, f);
      init_const(L.b2, p + "b2", 1, d, T(0));
    }
    m.dec.resize(static_cast<size_t>(config.dec_layers));
    for (int l = 0; l < config.dec_layers; ++l) {
      auto& L = m.dec[static_cast<size_t>(l)];
      std::string p = "dec" + std::to_string(l) + ".";
      init_const(L.ln1_g, p + "ln1_g", 1, d, T(1));
      init_const(L.ln1_b, p + "ln1_b", 1, d, T(0));
      init_w(L.wq, p + "wq", d, d);
      init_const(L.bq, p + "bq", 1, d, T(0));
      init_w(L.wk, p + "wk", d, d);
      init_const(L.bk, p + "bk", 1, d, T(0));
      init_w(L.wv, p + "wv", d, d);
      init_const(L.bv, p + "bv", 1, d, T(0));
      init_w(L.wo, p + "wo", d, d);
      init_const(L.bo, p + "bo", 1, d, T(0));
      init_const(L.ln2_g, p + "ln2_g", 1, d, T(1));
      init_const(L.ln2_b, p + "ln2_b", 1, d, T(0));
      init_w(L.cq, p + "cq", d, d);
      init_const(L.cbq, p + "cbq", 1, d, T(0));
      init_w(L.ck, p + "ck", d, d);
      init_const(L.cbk, p + "cbk", 1, d, T(0));
      init_w(L.cv, p + "cv", d, d);
      init_const(L.cbv, p + "cbv", 1, d, T(0));
      init_w(L.co, p + "co", d, d);
      init_const(L.cbo, p + "cbo", 1, d, T(0));
      init_const(L.ln3_g, p + "ln3_g", 1, d, T(1));
      init_const(L.ln3_b, p + "ln3_b", 1, d, T(0));
      init_w(L.w1, p + "w1", f, d);
      init_const(L.b1, p + "b1", 1, f, T(0));
      init_w(L.w2, p + "w2", d, f);
      init_const(L.b2, p + "b2", 1, d, T(0));
    }
    return m;
  }

  std::vector<nn::Param<T>*> trainable_params() {
    std::vector<nn::Param<T>*> out = {&enc_pos,     &dec_pos,     &out_bias,   &enc_final_g,
                                      &enc_final_b, &dec_final_g, &dec_final_b};
    for (auto& L : enc)
      for (auto* p : {&L.ln1_g, &L.ln1_b, &L.wq, &L.bq, &L.wk, &L.bk, &L.wv, &L.bv, &L.wo, &L.bo,
                      &L.ln2_g, &L.ln2_b, &L.w1, &L.b1, &L.w2, &L.b2})
        out.push_back(p);
    for (auto& L : dec)
      for (auto* p : {&L.ln1_g, &L.ln1_b, &L.wq, &L.bq, &L.wk, &L.bk, &L.wv, &L.bv, &L.wo,
                      &L.bo,    &L.ln2_g, &L.ln2_b, &L.cq, &L.cbq, &L.ck, &L.cbk, &L.cv, &L.cbv,
                      &L.co,    &L.cbo,   &L.ln3_g, &L.ln3_b, &L.w1, &L.b1, &L.w2, &L.b2})
        out.push_back(p);
    return out;
  }

  uint64_t embedding_checksum() const {
    std::string_view bytes(reinterpret_cast<const char*>(tok_emb.ptr()),
                           tok_emb.size() * sizeof(T));
    return fnv1a64(bytes);
  }

  std::vector<Tensor<T>> snapshot_params() {
    std::vector<Tensor<T>> out;
    for (auto* p : trainable_params()) out.push_back(p->value);
    return out;
  }

  void restore_params(const std::vector<Tensor<T>>& snapshot) {
    auto params = trainable_params();
    if (snapshot.size() != params.size())
      throw PipelineError("model", "parameter snapshot size mismatch");
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = snapshot[i];
  }

  // token embedding + positional embedding, no language-code term
  Tensor<T> input_representation(const TokenSeq& tokens) const {
    check_positions(static_cast<int>(tokens.size()));
    Tensor<T> out(tokens.size(), static_cast<size_t>(cfg.d_model));
    for (size_t i = 0; i < tokens.size(); ++i) {
      const T* te = tok_emb.row(static_cast<size_t>(tokens[i]));
      const T* pe = enc_pos.value.row(i);
      T* o = out.row(i);
      for (int j = 0; j < cfg.d_model; ++j) o[j] = te[j] + pe[j];
    }
    return out;
  }

  nn::Graph<T>::Var encode(nn::Graph<T>& g, const EncBatch& eb, bool train, Rng& rng) const {
    check_positions(eb.positions);
    auto x = g.embed_sum(tok_emb, const_cast<nn::Param<T>&>(enc_pos), eb.tokens, eb.positions);
    x = g.dropout(x, cfg.dropout, rng, train);
    auto layout = eb.layout();
    for (auto& Lc : enc) {
      auto& L = const_cast<EncLayer&>(Lc);
      auto h = g.layer_norm(x, L.ln1_g, L.ln1_b);
      auto q = g.linear(h, L.wq, L.bq);
      auto k = g.linear(h, L.wk, L.bk);
      auto v = g.linear(h, L.wv, L.bv);
      auto a = g.attention(q, k, v, cfg.heads, layout, layout, /*causal=*/false);
      a = g.linear(a, L.wo, L.bo);
      a = g.dropout(a, cfg.dropout, rng, train);
      x = g.add(x, a);
      auto f = g.layer_norm(x, L.ln2_g, L.ln2_b);
      f = g.linear(f, L.w1, L.b1);
      f = g.relu(f);
      f = g.linear(f, L.w2, L.b2);
      f = g.dropout(f, cfg.dropout, rng, train);
      x = g.add(x, f);
    }
    return g.layer_norm(x, const_cast<nn::Param<T>&>(enc_final_g),
                        const_cast<nn::Param<T>&>(enc_final_b));
  }

  nn::Graph<T>::Var decode(nn::Graph<T>& g, typename nn::Graph<T>::Var enc_out,
                           const EncBatch& eb, const DecBatch& db, bool train, Rng& rng) const {
    check_positions(db.positions);
    auto x = g.embed_sum(tok_emb, const_cast<nn::Param<T>&>(dec_pos), db.in_tokens, db.positions);
    x = g.dropout(x, cfg.dropout, rng, train);
    auto dl = db.layout();
    auto el = eb.layout();
    for (auto& Lc : dec) {
      auto& L = const_cast<DecLayer&>(Lc);
      auto h = g.layer_norm(x, L.ln1_g, L.ln1_b);
      auto q = g.linear(h, L.wq, L.bq);
      auto k = g.linear(h, L.wk, L.bk);
      auto v = g.linear(h, L.wv, L.bv);
      auto a = g.attention(q, k, v, cfg.heads, dl, dl, /*causal=*/true);
      a = g.linear(a, L.wo, L.bo);
      a = g.dropout(a, cfg.dropout, rng, train);
      x = g.add(x, a);

      auto h2 = g.layer_norm(x, L.ln2_g, L.ln2_b);
      auto q2 = g.linear(h2, L.cq, L.cbq);
      auto k2 = g.linear(enc_out, L.ck, L.cbk);
      auto v2 = g.linear(enc_out, L.cv, L.cbv);
      auto a2 = g.attention(q2, k2, v2, cfg.heads, dl, el, /*causal=*/false);
      a2 = g.linear(a2, L.co, L.cbo);
      a2 = g.dropout(a2, cfg.dropout, rng, train);
      x = g.add(x, a2);

      auto f = g.layer_norm(x, L.ln3_g, L.ln3_b);
      f = g.linear(f, L.w1, L.b1);
      f = g.relu(f);
      f = g.linear(f, L.w2, L.b2);
      f = g.dropout(f, cfg.dropout, rng, train);
      x = g.add(x, f);
    }
    return g.layer_norm(x, const_cast<nn::Param<T>&>(dec_final_g),
                        const_cast<nn::Param<T>&>(dec_final_b));
  }

  typename nn::Graph<T>::CeResult forward_loss(nn::Graph<T>& g, const EncBatch& eb,
                                               const DecBatch& db, bool train, Rng& rng) const {
    auto enc_out = encode(g, eb, train, rng);
    auto dec_out = decode(g, enc_out, eb, db, train, rng);
    return g.tied_softmax_ce(dec_out, tok_emb, const_cast<nn::Param<T>&>(out_bias), db.targets,
                             db.target_mask);
  }

  // ----- incremental greedy decoding (inference path, no tape) -----

  // Returns generated tokens (no bos/eos). When allowed is non-null, argmax
  // is restricted to ids with allowed[id] != 0.
  TokenSeq greedy_decode(const TokenSeq& source, int max_len,
                         const std::vector<char>* allowed = nullptr) const {
    Tensor<T> enc_out = encode_infer(source);
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t S = source.size();

    // per decoder layer: self-attention K/V caches and precomputed cross K/V
    std::vector<Tensor<T>> self_k(dec.size()), self_v(dec.size());
    std::vector<Tensor<T>> cross_k(dec.size()), cross_v(dec.size());
    for (size_t l = 0; l < dec.size(); ++l) {
      self_k[l].resize(static_cast<size_t>(max_len), d);
      self_v[l].resize(static_cast<size_t>(max_len), d);
      cross_k[l].resize(S, d);
      cross_v[l].resize(S, d);
      linear_rows(cross_k[l], enc_out, dec[l].ck, dec[l].cbk);
      linear_rows(cross_v[l], enc_out, dec[l].cv, dec[l].cbv);
    }

    TokenSeq out;
    int32_t prev = Vocab::kBos;
    std::vector<T> x(d), h(d), q(d), scratch(d), f1(static_cast<size_t>(cfg.d_ffn));
    std::vector<T> logits(tok_emb.rows);
    for (int t = 0; t < max_len; ++t) {
      if (t >= cfg.max_positions) break;
      const T* te = tok_emb.row(static_cast<size_t>(prev));
      const T* pe = dec_pos.value.row(static_cast<size_t>(t));
      for (size_t j = 0; j < d; ++j) x[j] = te[j] + pe[j];

      for (size_t l = 0; l < dec.size(); ++l) {
        const auto& L = dec[l];
        layer_norm_row(h.data(), x.data(), L.ln1_g, L.ln1_b, d);
        // self-attention with cache
        linear_row(q.data(), h.data(), L.wq, L.bq);
        linear_row(self_k[l].row(static_cast<size_t>(t)), h.data(), L.wk, L.bk);
        linear_row(self_v[l].row(static_cast<size_t>(t)), h.data(), L.wv, L.bv);
        attend_row(scratch.data(), q.data(), self_k[l], self_v[l], static_cast<size_t>(t) + 1);
        linear_row(h.data(), scratch.data(), L.wo, L.bo);
        for (size_t j = 0; j < d; ++j) x[j] += h[j];
        // cross-attention
        layer_norm_row(h.data(), x.data(), L.ln2_g, L.ln2_b, d);
        linear_row(q.data(), h.data(), L.cq, L.cbq);
        attend_row(scratch.data(), q.data(), cross_k[l], cross_v[l], S);
        linear_row(h.data(), scratch.data(), L.co, L.cbo);
        for (size_t j = 0; j < d; ++j) x[j] += h[j];
        // feed-forward
        layer_norm_row(h.data(), x.data(), L.ln3_g, L.ln3_b, d);
        linear_row_any(f1.data(), h.data(), L.w1, L.b1, static_cast<size_t>(cfg.d_ffn), d);
        for (auto& v : f1) v = v > T(0) ? v : T(0);
        linear_row_any(scratch.data(), f1.data(), L.w2, L.b2, d, static_cast<size_t>(cfg.d_ffn));
        for (size_t j = 0; j < d; ++j) x[j] += scratch[j];
      }
      layer_norm_row(h.data(), x.data(), dec_final_g, dec_final_b, d);
      for (size_t v = 0; v < tok_emb.rows; ++v)
        logits[v] = kernels::dot_span(tok_emb.row(v), h.data(), d) + out_bias.value.at(0, v);

      int32_t best = -1;
      T best_score = std::numeric_limits<T>::lowest();
      for (size_t v = 0; v < logits.size(); ++v) {
        if (allowed && !(*allowed)[v]) continue;
        if (static_cast<int32_t>(v) == Vocab::kPad || static_cast<int32_t>(v) == Vocab::kBos)
          continue;
        if (logits[v] > best_score) {
          best_score = logits[v];
          best = static_cast<int32_t>(v);
        }
      }
      if (best == Vocab::kEos || best < 0) break;
      out.push_back(best);
      prev = best;
    }
    return out;
  }

  Tensor<T> encode_infer(const TokenSeq& source) const {
    check_positions(static_cast<int>(source.size()));
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t S = source.size();
    Tensor<T> x(S, d);
    for (size_t i = 0; i < S; ++i) {
      const T* te = tok_emb.row(static_cast<size_t>(source[i]));
      const T* pe = enc_pos.value.row(i);
      for (size_t j = 0; j < d; ++j) x.at(i, j) = te[j] + pe[j];
    }
    Tensor<T> h(S, d), q(S, d), k(S, d), v(S, d), a(S, d), f(S, static_cast<size_t>(cfg.d_ffn));
    for (const auto& L : enc) {
      for (size_t i = 0; i < S; ++i) layer_norm_row(h.row(i), x.row(i), L.ln1_g, L.ln1_b, d);
      linear_rows(q, h, L.wq, L.bq);
      linear_rows(k, h, L.wk, L.bk);
      linear_rows(v, h, L.wv, L.bv);
      attend_all(a, q, k, v);
      linear_rows(h, a, L.wo, L.bo);
      for (size_t i = 0; i < x.size(); ++i) x.data[i] += h.data[i];
      for (size_t i = 0; i < S; ++i) layer_norm_row(h.row(i), x.row(i), L.ln2_g, L.ln2_b, d);
      linear_rows_any(f, h, L.w1, L.b1);
      for (auto& z : f.data) z = z > T(0) ? z : T(0);
      linear_rows_any(h, f, L.w2, L.b2);
      for (size_t i = 0; i < x.size(); ++i) x.data[i] += h.data[i];
    }
    Tensor<T> out(S, d);
    for (size_t i = 0; i < S; ++i) layer_norm_row(out.row(i), x.row(i), enc_final_g, enc_final_b, d);
    return out;
  }

  void save(const std::string& path) const;
  static TransformerT load(const std::string& path);

 private:
  void check_positions(int needed) const {
    if (needed > cfg.max_positions)
      throw PipelineError("model", "sequence longer than max_positions");
  }
  void check_positions(const std::vector<int32_t>& positions) const {
    for (int32_t p : positions)
      if (p >= cfg.max_positions) throw PipelineError("model", "position beyond max_positions");
  }

  void layer_norm_row(T* out, const T* in, const nn::Param<T>& g, const nn::Param<T>& b,
                      size_t d) const {
    T mean = T(0);
    for (size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<T>(d);
    T inv = T(1) / std::sqrt(var + T(1e-5));
    for (size_t j = 0; j < d; ++j)
      out[j] = (in[j] - mean) * inv * g.value.at(0, j) + b.value.at(0, j);
  }

  void linear_row(T* out, const T* in, const nn::Param<T>& W, const nn::Param<T>& b) const {
    const size_t d = static_cast<size_t>(cfg.d_model);
    linear_row_any(out, in, W, b, d, d);
  }

  void linear_row_any(T* out, const T* in, const nn::Param<T>& W, const nn::Param<T>& b,
                      size_t rows, size_t cols) const {
    for (size_t o = 0; o < rows; ++o)
      out[o] = kernels::dot_span(W.value.row(o), in, cols) + b.value.at(0, o);
  }

  void linear_rows(Tensor<T>& out, const Tensor<T>& in, const nn::Param<T>& W,
                   const nn::Param<T>& b) const {
    kernels::matmul_nt(out.ptr(), in.ptr(), W.value.ptr(), in.rows, W.value.rows, in.cols);
    for (size_t r = 0; r < out.rows; ++r)
      kernels::axpy_span(out.row(r), T(1), b.value.row(0), out.cols);
  }

  void linear_rows_any(Tensor<T>& out, const Tensor<T>& in, const nn::Param<T>& W,
                       const nn::Param<T>& b) const {
    out.resize(in.rows, W.value.rows);
    linear_rows(out, in, W, b);
  }

  // single query row over cached keys/values, all heads
  void attend_row(T* out, const T* q, const Tensor<T>& K, const Tensor<T>& V, size_t n) const {
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t dh = d / static_cast<size_t>(cfg.heads);
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<T> w(n);
    for (size_t j = 0; j < d; ++j) out[j] = T(0);
    for (int h = 0; h < cfg.heads; ++h) {
      const size_t hoff = static_cast<size_t>(h) * dh;
      T maxs = std::numeric_limits<T>::lowest();
      for (size_t j = 0; j < n; ++j) {
        w[j] = kernels::dot_span(q + hoff, K.row(j) + hoff, dh) * scale;
        maxs = std::max(maxs, w[j]);
      }
      T sum = T(0);
      for (size_t j = 0; j < n; ++j) {
        w[j] = std::exp(w[j] - maxs);
        sum += w[j];
      }
      T inv = T(1) / sum;
      for (size_t j = 0; j < n; ++j) kernels::axpy_span(out + hoff, w[j] * inv, V.row(j) + hoff, dh);
    }
  }

  void attend_all(Tensor<T>& out, const Tensor<T>& Q, const Tensor<T>& K, const Tensor<T>& V) const {
    out.zero();
    for (size_t i = 0; i < Q.rows; ++i) attend_row(out.row(i), Q.row(i), K, V, K.rows);
  }
};

using Model = TransformerT<float>;

// Convenience: build a float model from an embedding matrix.
inline Model build_model(const ModelConfig& cfg, const TensorF& embeddings, uint64_t vocab_fp,
                         uint64_t seed) {
  return Model::build(cfg, embeddings, vocab_fp, seed);
}

}  // namespace unmtlab

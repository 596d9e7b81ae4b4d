#pragma once

#include <set>
#include <string>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/tensor.hpp>
#include <unmtlab/vocab.hpp>

namespace unmtlab::xembed {

struct SkipgramConfig {
  int dim = 64;
  int window = 5;
  int negatives = 5;
  int epochs = 10;
  double lr = 0.025;  // linearly decayed
};

// Skip-gram with negative sampling over the combined integer-encoded corpus.
// Single-threaded and deterministic given the seed. Tokens absent from the
// corpus keep their initialization.
TensorF train_skipgram(const std::vector<TokenSeq>& corpus, int32_t vocab_size,
                       const SkipgramConfig& cfg, uint64_t seed);

// Identical-surface seed pairs are (id, id) under the joint vocabulary; with
// disjoint surfaces the oracle bijection (held-out fraction) backs them up.
std::vector<std::pair<int32_t, int32_t>> seed_dictionary(
    const std::set<int32_t>& src_tokens, const std::set<int32_t>& tgt_tokens,
    const std::vector<std::pair<int32_t, int32_t>>& oracle_pairs, size_t min_pairs = 25,
    bool fallback = true);

struct AlignmentMap {
  TensorF w;  // d x d, orthogonal
  size_t dict_size = 0;
  int refine_iters = 0;
  bool degenerate_warning = false;
};

// Orthogonal map minimizing sum ||x_i W - y_i||^2 over the dictionary rows
// (rows are length-normalized first); solved via SVD of X^T Y.
AlignmentMap procrustes_align(const TensorF& embeddings, const TensorF& embeddings_tgt,
                              const std::vector<std::pair<int32_t, int32_t>>& dict);

// max |W^T W - I|
double orthogonality_error(const TensorF& w);

// Procrustes objective sum ||x_i W - y_i||^2 on normalized rows.
double procrustes_objective(const TensorF& x, const TensorF& y, const TensorF& w,
                            const std::vector<std::pair<int32_t, int32_t>>& dict);

// CSLS-based self-learning: induce a mutual-nearest dictionary between the
// mapped source rows and the target rows, re-solve, repeat.
AlignmentMap self_learning_refine(const TensorF& embeddings, const std::vector<int32_t>& src_ids,
                                  const std::vector<int32_t>& tgt_ids, const AlignmentMap& w0,
                                  int iters, int csls_k);

// CSLS scores of mapped x rows against y rows; returns for each x row the
// argmax y index.
std::vector<int32_t> csls_neighbors(const TensorF& x_mapped, const TensorF& y, int k);

// Joint static matrix in the target-aligned space: source rows are mapped
// through W, every row is length-normalized to `scale`. Specials get small
// seeded random directions.
TensorF export_static_embeddings(const TensorF& embeddings, const AlignmentMap& map,
                                 const std::set<int32_t>& src_tokens, float scale, uint64_t seed);

void save_embeddings_word2vec(const TensorF& emb, const Vocab& vocab, const std::string& path);
TensorF load_embeddings_word2vec(const Vocab& vocab, const std::string& path);

void save_alignment(const AlignmentMap& map, const std::string& path);

}  // namespace unmtlab::xembed

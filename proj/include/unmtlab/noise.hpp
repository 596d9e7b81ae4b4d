#pragma once

#include <cstdint>

#include <unmtlab/common.hpp>
#include <unmtlab/vocab.hpp>

namespace unmtlab::noise {

// All corruption hyperparameters for both pre-training objectives.
struct NoiseSpec {
  double mass_ratio = 0.5;  // fragment fraction; k = max(1, round(ratio * len))
  double mass_mask_p = 0.8;
  double mass_rand_p = 0.1;
  double mass_keep_p = 0.1;
  int shuffle_k = 3;         // max local displacement
  double word_dropout = 0.1;
  double word_blank = 0.1;

  void validate() const;
};

struct MassExample {
  TokenSeq corrupted_input;       // same length as the input
  TokenSeq target_fragment;       // original tokens of the fragment
  int fragment_start = 0;
  std::vector<int> decoder_positions;  // absolute positions of the fragment
};

// Chooses a contiguous fragment of k = max(1, round(mass_ratio*len)) tokens,
// corrupts it position-wise with (mask, random, keep) probabilities and
// leaves everything outside untouched.
MassExample mass_mask(const TokenSeq& tokens, const NoiseSpec& spec, const Vocab& vocab, uint64_t seed);

// Noise-sort local shuffle: key_i = i + u_i with u_i ~ U[0, k); stable sort.
// No token moves more than k positions; the output is a permutation.
TokenSeq dae_shuffle(const TokenSeq& tokens, int k, uint64_t seed);

// Independent word deletion then blanking of survivors with the mask token.
// At least one token always survives.
TokenSeq dae_dropout_blank(const TokenSeq& tokens, double p_drop, double p_blank, int32_t mask_id,
                           uint64_t seed);

struct DaeExample {
  TokenSeq corrupted;
  TokenSeq target;  // full original sentence
};

DaeExample dae_noise(const TokenSeq& tokens, const NoiseSpec& spec, const Vocab& vocab, uint64_t seed);

}  // namespace unmtlab::noise

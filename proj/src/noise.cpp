#include <unmtlab/noise.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace unmtlab::noise {

void NoiseSpec::validate() const {
  if (std::abs(mass_mask_p + mass_rand_p + mass_keep_p - 1.0) > 1e-9)
    throw PipelineError("noise", "mass mask/random/keep probabilities must sum to 1");
  for (double p : {mass_mask_p, mass_rand_p, mass_keep_p, word_dropout, word_blank})
    if (p < 0.0 || p > 1.0) throw PipelineError("noise", "probability out of [0, 1]");
  if (mass_ratio <= 0.0 || mass_ratio > 1.0)
    throw PipelineError("noise", "mass_ratio must be in (0, 1]");
  if (shuffle_k < 0) throw PipelineError("noise", "shuffle_k must be >= 0");
}

MassExample mass_mask(const TokenSeq& tokens, const NoiseSpec& spec, const Vocab& vocab,
                      uint64_t seed) {
  if (tokens.empty()) throw PipelineError("noise", "cannot mass-mask an empty sentence");
  spec.validate();
  const int len = static_cast<int>(tokens.size());
  const int k = std::max(1, static_cast<int>(std::lround(spec.mass_ratio * len)));

  Rng rng(seed);
  const int start = static_cast<int>(rng.uniform_index(static_cast<size_t>(len - k + 1)));

  MassExample ex;
  ex.corrupted_input = tokens;
  ex.fragment_start = start;
  ex.target_fragment.reserve(static_cast<size_t>(k));
  ex.decoder_positions.reserve(static_cast<size_t>(k));

  const int32_t non_special = vocab.size() - Vocab::kNumSpecials;
  for (int i = start; i < start + k; ++i) {
    ex.target_fragment.push_back(tokens[static_cast<size_t>(i)]);
    ex.decoder_positions.push_back(i);
    double r = rng.uniform();
    if (r < spec.mass_mask_p) {
      ex.corrupted_input[static_cast<size_t>(i)] = Vocab::kMask;
    } else if (r < spec.mass_mask_p + spec.mass_rand_p && non_special > 0) {
      ex.corrupted_input[static_cast<size_t>(i)] =
          Vocab::kNumSpecials + static_cast<int32_t>(rng.uniform_index(static_cast<size_t>(non_special)));
    }
    // else: kept unchanged
  }
  return ex;
}

TokenSeq dae_shuffle(const TokenSeq& tokens, int k, uint64_t seed) {
  if (k < 0) throw PipelineError("noise", "shuffle bound must be >= 0");
  if (k == 0 || tokens.size() < 2) return tokens;
  Rng rng(seed);
  std::vector<std::pair<double, size_t>> keyed(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i)
    keyed[i] = {static_cast<double>(i) + rng.uniform(0.0, static_cast<double>(k)), i};
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  TokenSeq out(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) out[i] = tokens[keyed[i].second];
  return out;
}

TokenSeq dae_dropout_blank(const TokenSeq& tokens, double p_drop, double p_blank, int32_t mask_id,
                           uint64_t seed) {
  if (p_drop < 0.0 || p_drop >= 1.0 || p_blank < 0.0 || p_blank >= 1.0)
    throw PipelineError("noise", "dropout/blank probabilities must be in [0, 1)");
  Rng rng(seed);
  TokenSeq out;
  out.reserve(tokens.size());
  for (int32_t t : tokens) {
    if (rng.bernoulli(p_drop)) continue;
    out.push_back(rng.bernoulli(p_blank) ? mask_id : t);
  }
  if (out.empty() && !tokens.empty()) {
    // keep one uniformly chosen original token so the input never vanishes
    out.push_back(tokens[rng.uniform_index(tokens.size())]);
  }
  return out;
}

DaeExample dae_noise(const TokenSeq& tokens, const NoiseSpec& spec, const Vocab& vocab, uint64_t seed) {
  if (tokens.empty()) throw PipelineError("noise", "cannot corrupt an empty sentence");
  spec.validate();
  (void)vocab;
  uint64_t s = seed;
  uint64_t shuffle_seed = splitmix64(s);
  uint64_t drop_seed = splitmix64(s);
  DaeExample ex;
  ex.target = tokens;
  TokenSeq shuffled = dae_shuffle(tokens, spec.shuffle_k, shuffle_seed);
  ex.corrupted = dae_dropout_blank(shuffled, spec.word_dropout, spec.word_blank, Vocab::kMask, drop_seed);
  return ex;
}

}  // namespace unmtlab::noise

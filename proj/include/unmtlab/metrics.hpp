#pragma once

#include <string>
#include <vector>

#include <unmtlab/common.hpp>

namespace unmtlab::metrics {

// Corpus BLEU, n = 1..4, clipped precisions, brevity penalty, no smoothing
// (any zero precision gives score 0). Tokenization is whitespace.
double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

// Character n-gram F-score, n = 1..6, beta = 2, whitespace included.
// Corpus-level aggregation averages per-n precision/recall; orders with no
// n-grams on either side are skipped.
double chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references);

struct LengthBin {
  int lo = 0;
  int hi = 0;  // exclusive
  size_t count = 0;
  double bleu = 0.0;
  bool low_confidence = false;  // fewer than 5 sentences
};

// Corpus BLEU within each source-length bin. bin_edges define consecutive
// [edges[i], edges[i+1]) bins and must cover every source length.
std::vector<LengthBin> bleu_by_length(const std::vector<std::string>& hypotheses,
                                      const std::vector<std::string>& references,
                                      const std::vector<int>& source_lengths,
                                      const std::vector<int>& bin_edges);

}  // namespace unmtlab::metrics

#include <unmtlab/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace unmtlab::metrics {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

using NgramCounts = std::map<std::string, int64_t>;

NgramCounts word_ngrams(const std::vector<std::string>& tokens, size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (size_t j = 0; j < n; ++j) {
      key += tokens[i + j];
      key += '\x1f';
    }
    ++counts[key];
  }
  return counts;
}

NgramCounts char_ngrams(const std::string& s, size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

int64_t clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  int64_t total = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) total += std::min(c, it->second);
  }
  return total;
}

int64_t total_count(const NgramCounts& c) {
  int64_t t = 0;
  for (const auto& [g, n] : c) t += n;
  return t;
}

}  // namespace

double bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size())
    throw PipelineError("eval", "hypothesis/reference count mismatch");
  if (hypotheses.empty()) throw PipelineError("eval", "empty corpus");

  constexpr size_t kMaxOrder = 4;
  int64_t match[kMaxOrder] = {};
  int64_t total[kMaxOrder] = {};
  int64_t hyp_len = 0, ref_len = 0;

  for (size_t s = 0; s < hypotheses.size(); ++s) {
    auto hyp = split_ws(hypotheses[s]);
    auto ref = split_ws(references[s]);
    hyp_len += static_cast<int64_t>(hyp.size());
    ref_len += static_cast<int64_t>(ref.size());
    for (size_t n = 1; n <= kMaxOrder; ++n) {
      auto hgrams = word_ngrams(hyp, n);
      auto rgrams = word_ngrams(ref, n);
      match[n - 1] += clipped_matches(hgrams, rgrams);
      total[n - 1] += total_count(hgrams);
    }
  }

  if (hyp_len == 0) return 0.0;
  double log_prec = 0.0;
  size_t orders = 0;
  for (size_t n = 0; n < kMaxOrder; ++n) {
    if (total[n] == 0) continue;  // order absent from the whole corpus (effective order)
    if (match[n] == 0) return 0.0;  // no smoothing: a zero precision zeroes the score
    log_prec += std::log(static_cast<double>(match[n]) / static_cast<double>(total[n]));
    ++orders;
  }
  if (orders == 0) return 0.0;
  double bp = hyp_len < ref_len
                  ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                  : 1.0;
  return 100.0 * bp * std::exp(log_prec / static_cast<double>(orders));
}

double chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references) {
  if (hypotheses.size() != references.size())
    throw PipelineError("eval", "hypothesis/reference count mismatch");
  if (hypotheses.empty()) throw PipelineError("eval", "empty corpus");

  constexpr size_t kMaxOrder = 6;
  constexpr double kBeta2 = 4.0;  // beta = 2
  int64_t match[kMaxOrder] = {};
  int64_t hyp_total[kMaxOrder] = {};
  int64_t ref_total[kMaxOrder] = {};

  for (size_t s = 0; s < hypotheses.size(); ++s) {
    for (size_t n = 1; n <= kMaxOrder; ++n) {
      auto hgrams = char_ngrams(hypotheses[s], n);
      auto rgrams = char_ngrams(references[s], n);
      match[n - 1] += clipped_matches(hgrams, rgrams);
      hyp_total[n - 1] += total_count(hgrams);
      ref_total[n - 1] += total_count(rgrams);
    }
  }

  double prec_sum = 0.0, rec_sum = 0.0;
  int orders = 0;
  for (size_t n = 0; n < kMaxOrder; ++n) {
    if (hyp_total[n] == 0 && ref_total[n] == 0) continue;  // order absent on both sides
    double p = hyp_total[n] > 0 ? static_cast<double>(match[n]) / static_cast<double>(hyp_total[n]) : 0.0;
    double r = ref_total[n] > 0 ? static_cast<double>(match[n]) / static_cast<double>(ref_total[n]) : 0.0;
    prec_sum += p;
    rec_sum += r;
    ++orders;
  }
  if (orders == 0) return 0.0;
  double prec = prec_sum / orders;
  double rec = rec_sum / orders;
  double denom = kBeta2 * prec + rec;
  if (denom <= 0.0) return 0.0;
  return 100.0 * (1.0 + kBeta2) * prec * rec / denom;
}

std::vector<LengthBin> bleu_by_length(const std::vector<std::string>& hypotheses,
                                      const std::vector<std::string>& references,
                                      const std::vector<int>& source_lengths,
                                      const std::vector<int>& bin_edges) {
  if (hypotheses.size() != references.size() || hypotheses.size() != source_lengths.size())
    throw PipelineError("eval", "hypothesis/reference/source count mismatch");
  if (bin_edges.size() < 2) throw PipelineError("eval", "need at least one length bin");

  std::vector<LengthBin> bins;
  for (size_t i = 0; i + 1 < bin_edges.size(); ++i)
    bins.push_back(LengthBin{bin_edges[i], bin_edges[i + 1], 0, 0.0, false});

  std::vector<std::vector<std::string>> bin_hyps(bins.size()), bin_refs(bins.size());
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    int len = source_lengths[s];
    bool placed = false;
    for (size_t b = 0; b < bins.size(); ++b) {
      if (len >= bins[b].lo && len < bins[b].hi) {
        bin_hyps[b].push_back(hypotheses[s]);
        bin_refs[b].push_back(references[s]);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw PipelineError("eval", "source length " + std::to_string(len) + " not covered by bins");
  }
  for (size_t b = 0; b < bins.size(); ++b) {
    bins[b].count = bin_hyps[b].size();
    bins[b].low_confidence = bins[b].count < 5;
    bins[b].bleu = bin_hyps[b].empty() ? 0.0 : bleu(bin_hyps[b], bin_refs[b]);
  }
  return bins;
}

}  // namespace unmtlab::metrics

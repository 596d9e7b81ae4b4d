#include <unmtlab/corpus.hpp>

#include <algorithm>
#include <numeric>

namespace unmtlab {

std::string side_name(Side s) {
  switch (s) {
    case Side::Src: return "src";
    case Side::Tgt: return "tgt";
    case Side::SrcReordered: return "src-reordered";
  }
  return "?";
}

Corpus encode_corpus(const Vocab& vocab, const std::vector<Words>& segmented, Side side,
                     std::string provenance) {
  Corpus c;
  c.side = side;
  c.provenance = std::move(provenance);
  c.sentences.reserve(segmented.size());
  for (const auto& sent : segmented) {
    if (sent.empty()) throw PipelineError("corpus", "empty sentence in corpus");
    c.sentences.push_back(vocab.encode(sent));
  }
  return c;
}

FilteredData filter_noise_removal(const Corpus& original, const Corpus& reordered,
                                  const std::set<size_t>& failed_ids,
                                  const std::vector<synthlang::SentencePair>& valid,
                                  const std::set<size_t>& valid_failed,
                                  const std::vector<synthlang::SentencePair>& test,
                                  const std::set<size_t>& test_failed) {
  if (original.sentences.size() != reordered.sentences.size())
    throw PipelineError("corpus", "original and reordered corpora are not index-aligned");
  if (!failed_ids.empty() && *failed_ids.rbegin() >= original.sentences.size())
    throw PipelineError("corpus", "failed id beyond corpus size");

  FilteredData out;
  out.original.side = original.side;
  out.original.provenance = original.provenance;
  out.reordered.side = reordered.side;
  out.reordered.provenance = reordered.provenance;
  out.original.sentences = filter_by_ids(original.sentences, failed_ids);
  out.reordered.sentences = filter_by_ids(reordered.sentences, failed_ids);
  out.valid = filter_by_ids(valid, valid_failed);
  out.test = filter_by_ids(test, test_failed);
  return out;
}

synthlang::RawCorpus filter_raw(const synthlang::RawCorpus& corpus, const std::set<size_t>& failed_ids) {
  synthlang::RawCorpus out;
  out.sentences = filter_by_ids(corpus.sentences, failed_ids);
  return out;
}

std::vector<Batch> make_epoch_batches(const Corpus& corpus, const BatchingConfig& cfg, uint64_t seed,
                                      size_t epoch) {
  const size_t n = corpus.sentences.size();
  if (n == 0) throw PipelineError("corpus", "cannot batch an empty corpus");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "batch-order", std::to_string(epoch)));
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

  auto noise_seed = [&](size_t idx) {
    return derive_seed(seed, "noise:" + std::to_string(epoch), std::to_string(idx));
  };

  std::vector<Batch> batches;
  Batch cur;
  size_t cur_max_len = 0;
  for (size_t k = 0; k < n; ++k) {
    size_t idx = order[k];
    size_t len = corpus.sentences[idx].size();
    bool flush = false;
    if (cfg.token_budget > 0) {
      size_t new_max = std::max(cur_max_len, len);
      if (!cur.indices.empty() && (cur.indices.size() + 1) * new_max > cfg.token_budget) flush = true;
    }
    if (cur.indices.size() >= cfg.batch_size) flush = true;
    if (flush) {
      batches.push_back(std::move(cur));
      cur = Batch{};
      cur_max_len = 0;
    }
    cur.indices.push_back(idx);
    cur.noise_seeds.push_back(noise_seed(idx));
    cur_max_len = std::max(cur_max_len, len);
  }
  if (!cur.indices.empty()) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace unmtlab

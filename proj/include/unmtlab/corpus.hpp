#pragma once

#include <set>
#include <string>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/synthlang.hpp>
#include <unmtlab/vocab.hpp>

namespace unmtlab {

enum class Side { Src, Tgt, SrcReordered };

std::string side_name(Side s);

struct Corpus {
  std::vector<TokenSeq> sentences;
  Side side = Side::Src;
  std::string provenance;
};

// Encodes segmented text; empty sentences are rejected.
Corpus encode_corpus(const Vocab& vocab, const std::vector<Words>& segmented, Side side,
                     std::string provenance = {});

// Removes the failed ids from the index-aligned original/reordered pair and
// drops eval pairs whose source failed. Sizes shrink by exactly the failure
// counts, identically on both monolingual sides.
struct FilteredData {
  Corpus original;
  Corpus reordered;
  std::vector<synthlang::SentencePair> valid;
  std::vector<synthlang::SentencePair> test;
};

FilteredData filter_noise_removal(const Corpus& original, const Corpus& reordered,
                                  const std::set<size_t>& failed_ids,
                                  const std::vector<synthlang::SentencePair>& valid,
                                  const std::set<size_t>& valid_failed,
                                  const std::vector<synthlang::SentencePair>& test,
                                  const std::set<size_t>& test_failed);

// Raw-text variant used before encoding.
synthlang::RawCorpus filter_raw(const synthlang::RawCorpus& corpus, const std::set<size_t>& failed_ids);

template <typename T>
std::vector<T> filter_by_ids(const std::vector<T>& items, const std::set<size_t>& failed_ids) {
  std::vector<T> out;
  out.reserve(items.size() - failed_ids.size());
  for (size_t i = 0; i < items.size(); ++i)
    if (!failed_ids.count(i)) out.push_back(items[i]);
  return out;
}

struct BatchingConfig {
  size_t batch_size = 64;   // sentences per batch
  size_t token_budget = 0;  // when nonzero, cap on padded tokens per batch
};

struct Batch {
  std::vector<size_t> indices;      // into the corpus
  std::vector<uint64_t> noise_seeds;  // one per sentence, hash(epoch, index)
};

// Deterministic shuffled epoch order; covers every sentence exactly once.
// Per-sentence noise seeds depend only on (corpus seed, epoch, sentence
// index), so corruption is reproducible regardless of scheduling.
std::vector<Batch> make_epoch_batches(const Corpus& corpus, const BatchingConfig& cfg, uint64_t seed,
                                      size_t epoch);

}  // namespace unmtlab

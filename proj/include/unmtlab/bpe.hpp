#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/synthlang.hpp>

namespace unmtlab::bpe {

using synthlang::Words;

struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;  // ordered by learning step
  uint64_t corpus_fingerprint = 0;

  // merge pair -> rank, rebuilt after load
  std::map<std::pair<std::string, std::string>, size_t> rank;
  void rebuild_rank();
};

// Learns merges jointly over all given corpora (the caller passes both
// languages' text together). Ties broken by lexicographic pair order;
// stops early when no pair repeats.
BpeModel learn_bpe(const std::vector<Words>& corpora_sentences, size_t n_merges);

// Segments one word. Non-final subwords carry the "@@" continuation suffix.
std::vector<std::string> apply_bpe_word(const BpeModel& model, const std::string& word);

Words apply_bpe(const BpeModel& model, const Words& sentence);

// Joins "@@"-continued subwords back into words.
Words detokenize(const Words& subwords);

void save_bpe(const BpeModel& model, const std::string& path);
BpeModel load_bpe(const std::string& path);

}  // namespace unmtlab::bpe

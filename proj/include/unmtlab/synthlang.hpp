#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <unmtlab/common.hpp>

namespace unmtlab::synthlang {

using Words = std::vector<std::string>;

// One production. rhs symbols are nonterminal names or terminal-class names;
// reorder is the permutation of rhs children that turns source constituent
// order into target order.
struct Rule {
  std::string lhs;
  std::vector<std::string> rhs;
  double weight = 1.0;
  std::vector<int> reorder;
};

struct GrammarConfig {
  std::vector<Rule> rules;
  std::map<std::string, int> lexicon_sizes;  // terminal class -> word count
  std::set<std::string> closed_classes;      // exempt from the open-class size minimum
  std::string start = "S";
  int max_len = 30;
  int max_depth = 9;
  int open_class_min = 10;
  // Selectional preferences: each sentence draws a latent topic vector and
  // open-class word choice follows softmax affinity between the topic and a
  // per-word latent. This gives every word a distributional signature that
  // the token bijection carries over to the target language; without it,
  // words within a class are exchangeable and no distributional method could
  // tell them apart.
  int topic_dim = 4;
  double topic_tau = 2.0;  // 0 disables the preference structure
  // When set, subjects and objects share one lexicon, so reordered sentences
  // become role-ambiguous. No acceptance behavior depends on this.
  bool ambiguity_hooks = false;
};

// SVO source grammar whose target rendering is SOV with postpositions.
GrammarConfig default_grammar_config(int words_per_open_class = 50);

struct Derivation {
  int rule = -1;                     // -1 marks a terminal leaf
  std::string word;                  // leaf only
  std::vector<Derivation> children;  // rule nodes only
};

struct GrammarPair {
  GrammarConfig config;
  std::map<std::string, std::vector<std::string>> src_lexicon;  // class -> words
  std::unordered_map<std::string, std::string> tgt_token_map;   // src word -> tgt word
  std::unordered_map<std::string, std::string> src_token_map;   // tgt word -> src word
  std::unordered_map<std::string, std::string> word_class;      // src word -> class
  std::unordered_map<std::string, std::vector<double>> word_topics;  // src word -> latent
  uint64_t seed = 0;

  bool is_terminal_class(const std::string& sym) const { return src_lexicon.count(sym) > 0; }
  const std::string& map_to_target(const std::string& src_word) const;
  const std::string& map_to_source(const std::string& tgt_word) const;
  Words map_to_target(const Words& src_words) const;
};

struct SentencePair {
  Words src;  // SVO, source vocabulary
  Words tgt;  // SOV, target vocabulary
  Derivation derivation;
};

struct RawCorpus {
  std::vector<Words> sentences;
};

GrammarPair build_grammar(const GrammarConfig& config, uint64_t seed);

enum class SampleSide { Src, Tgt };
RawCorpus sample_monolingual(const GrammarPair& grammar, SampleSide side, size_t n, uint64_t seed);

// Source-order and target-order leaf sequences of a derivation.
Words flatten_source(const Derivation& d);
Words flatten_target(const Derivation& d, const GrammarPair& grammar);

// Parses the sentence and returns its SOV permutation (source vocabulary
// retained). Throws ParseFailure when the sentence does not parse.
Words oracle_reorder(const Words& sentence, const GrammarPair& grammar);

// Parses a source sentence; throws ParseFailure if it is not derivable.
Derivation parse(const Words& sentence, const GrammarPair& grammar);

struct ReorderResult {
  RawCorpus reordered;       // index-aligned with the input; failed entries keep the original words
  std::set<size_t> failed_ids;
};

// Marks each sentence failed independently with probability fail_rate and
// oracle-reorders the rest. The oracle itself never fails; failures simulate
// a reordering tool's parse errors so the removal protocol can be exercised.
ReorderResult inject_parse_failures(const GrammarPair& grammar, const RawCorpus& corpus,
                                    double fail_rate, uint64_t seed);

struct EvalSets {
  std::vector<SentencePair> valid;
  std::vector<SentencePair> test;
};

EvalSets make_eval_sets(const GrammarPair& grammar, size_t n_valid, size_t n_test, uint64_t seed);

// Exact expected fraction of tokens per terminal class under the sampler's
// depth-bounded rule distribution. Independent of sampling; used as the
// oracle for frequency tests.
std::map<std::string, double> expected_class_frequencies(const GrammarPair& grammar);

// Longest sentence the sampler can produce (depth-bounded DP).
int max_derivable_length(const GrammarConfig& config);

void save_grammar(const GrammarPair& grammar, const std::string& path);
GrammarPair load_grammar(const std::string& path);

void save_corpus(const RawCorpus& corpus, const std::string& path);
RawCorpus load_corpus(const std::string& path);

}  // namespace unmtlab::synthlang

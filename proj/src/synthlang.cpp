#include <unmtlab/synthlang.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace unmtlab::synthlang {

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

struct GrammarIndex {
  std::vector<std::string> nonterminals;
  std::map<std::string, std::vector<size_t>> rules_of;  // lhs -> rule indices
  std::map<std::string, int> min_height;                // symbol -> min derivation height
};

GrammarIndex index_grammar(const GrammarConfig& cfg) {
  GrammarIndex idx;
  for (size_t i = 0; i < cfg.rules.size(); ++i) idx.rules_of[cfg.rules[i].lhs].push_back(i);
  for (const auto& [lhs, _] : idx.rules_of) idx.nonterminals.push_back(lhs);

  for (const auto& [cls, _] : cfg.lexicon_sizes) idx.min_height[cls] = 1;
  for (const auto& nt : idx.nonterminals) idx.min_height[nt] = kInf;

  // Fixpoint over min derivation heights; unproductive symbols stay at kInf.
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& rule : cfg.rules) {
      int h = 0;
      for (const auto& sym : rule.rhs) {
        auto it = idx.min_height.find(sym);
        if (it == idx.min_height.end()) {
          throw PipelineError("synthlang", "rule for '" + rule.lhs + "' references unknown symbol '" +
                                               sym + "'");
        }
        h = std::max(h, it->second);
      }
      if (h < kInf && h + 1 < idx.min_height[rule.lhs]) {
        idx.min_height[rule.lhs] = h + 1;
        changed = true;
      }
    }
  }
  return idx;
}

// Rules usable at remaining depth budget d (children must still terminate).
std::vector<size_t> allowed_rules(const GrammarConfig& cfg, const GrammarIndex& idx,
                                  const std::string& sym, int budget) {
  std::vector<size_t> out;
  auto it = idx.rules_of.find(sym);
  if (it == idx.rules_of.end()) return out;
  for (size_t ri : it->second) {
    int h = 0;
    for (const auto& child : cfg.rules[ri].rhs) h = std::max(h, idx.min_height.at(child));
    if (h + 1 <= budget) out.push_back(ri);
  }
  return out;
}

struct Sampler {
  const GrammarPair& g;
  const GrammarIndex& idx;
  Rng& rng;
  std::vector<double> topic;  // per-sentence latent, refreshed by sample_sentence

  Derivation sample_sentence() {
    topic.resize(static_cast<size_t>(std::max(0, g.config.topic_dim)));
    for (auto& t : topic) t = rng.normal();
    return sample(g.config.start, g.config.max_depth);
  }

  Derivation sample(const std::string& sym, int budget) {
    if (g.is_terminal_class(sym)) {
      const auto& words = g.src_lexicon.at(sym);
      Derivation leaf;
      leaf.word = words[pick_word(words)];
      return leaf;
    }
    auto rules = allowed_rules(g.config, idx, sym, budget);
    std::vector<double> w;
    w.reserve(rules.size());
    for (size_t ri : rules) w.push_back(g.config.rules[ri].weight);
    size_t pick = rules[rng.categorical(w)];
    Derivation node;
    node.rule = static_cast<int>(pick);
    for (const auto& child : g.config.rules[pick].rhs) node.children.push_back(sample(child, budget - 1));
    return node;
  }

  size_t pick_word(const std::vector<std::string>& words) {
    if (g.config.topic_tau <= 0.0 || topic.empty()) return rng.uniform_index(words.size());
    std::vector<double> w(words.size());
    double max_a = -1e300;
    for (size_t i = 0; i < words.size(); ++i) {
      const auto& u = g.word_topics.at(words[i]);
      double a = 0.0;
      for (size_t k = 0; k < topic.size(); ++k) a += u[k] * topic[k];
      w[i] = g.config.topic_tau * a;
      max_a = std::max(max_a, w[i]);
    }
    for (auto& x : w) x = std::exp(x - max_a);
    return rng.categorical(w);
  }
};

void flatten_source_into(const Derivation& d, Words& out) {
  if (d.rule < 0) {
    out.push_back(d.word);
    return;
  }
  for (const auto& c : d.children) flatten_source_into(c, out);
}

void flatten_target_into(const Derivation& d, const GrammarPair& g, Words& out) {
  if (d.rule < 0) {
    out.push_back(d.word);
    return;
  }
  const auto& perm = g.config.rules[static_cast<size_t>(d.rule)].reorder;
  for (int child_idx : perm) flatten_target_into(d.children[static_cast<size_t>(child_idx)], g, out);
}

}  // namespace

const std::string& GrammarPair::map_to_target(const std::string& src_word) const {
  auto it = tgt_token_map.find(src_word);
  if (it == tgt_token_map.end()) throw ParseFailure("unknown source word: " + src_word);
  return it->second;
}

const std::string& GrammarPair::map_to_source(const std::string& tgt_word) const {
  auto it = src_token_map.find(tgt_word);
  if (it == src_token_map.end()) throw ParseFailure("unknown target word: " + tgt_word);
  return it->second;
}

Words GrammarPair::map_to_target(const Words& src_words) const {
  Words out;
  out.reserve(src_words.size());
  for (const auto& w : src_words) out.push_back(map_to_target(w));
  return out;
}

GrammarConfig default_grammar_config(int words_per_open_class) {
  GrammarConfig cfg;
  int n = words_per_open_class;
  cfg.lexicon_sizes = {{"subj", n}, {"obj", n},  {"pobj", std::max(10, n * 2 / 3)},
                       {"verb", n}, {"iverb", std::max(10, n / 2)}, {"adj", std::max(10, n * 2 / 3)},
                       {"prep", 8}, {"intj", 6}};
  cfg.closed_classes = {"prep", "intj"};
  // Source order is SVO with prepositions; target order is SOV with
  // postpositions. The permutations encode the constituent swaps.
  cfg.rules = {
      {"S", {"NP_S", "VP"}, 0.97, {0, 1}},
      {"S", {"intj"}, 0.03, {0}},
      {"VP", {"verb", "NP_O"}, 0.45, {1, 0}},
      {"VP", {"iverb"}, 0.12, {0}},
      {"VP", {"verb", "NP_O", "PP"}, 0.43, {1, 2, 0}},
      {"NP_S", {"subj"}, 0.58, {0}},
      {"NP_S", {"adj", "NP_S"}, 0.42, {0, 1}},
      {"NP_O", {"obj"}, 0.58, {0}},
      {"NP_O", {"adj", "NP_O"}, 0.42, {0, 1}},
      {"PP", {"prep", "NP_P"}, 1.0, {1, 0}},
      {"NP_P", {"pobj"}, 0.5, {0}},
      {"NP_P", {"adj", "NP_P"}, 0.27, {0, 1}},
      {"NP_P", {"pobj", "PP"}, 0.23, {1, 0}},
  };
  return cfg;
}

int max_derivable_length(const GrammarConfig& cfg) {
  GrammarIndex idx = index_grammar(cfg);
  std::map<std::pair<std::string, int>, int> memo;
  auto rec = [&](auto&& self, const std::string& sym, int budget) -> int {
    if (cfg.lexicon_sizes.count(sym)) return budget >= 1 ? 1 : -kInf;
    auto key = std::make_pair(sym, budget);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    int best = -kInf;
    for (size_t ri : allowed_rules(cfg, idx, sym, budget)) {
      int total = 0;
      for (const auto& child : cfg.rules[ri].rhs) total += self(self, child, budget - 1);
      best = std::max(best, total);
    }
    memo[key] = best;
    return best;
  };
  return rec(rec, cfg.start, cfg.max_depth);
}

GrammarPair build_grammar(const GrammarConfig& config_in, uint64_t seed) {
  GrammarConfig config = config_in;
  if (config.ambiguity_hooks && config.lexicon_sizes.count("subj") && config.lexicon_sizes.count("obj")) {
    // Case-unmarked subjects and objects share one lexicon class, so the
    // reordered rendering no longer marks grammatical role.
    for (auto& rule : config.rules)
      for (auto& sym : rule.rhs)
        if (sym == "obj") sym = "subj";
    config.lexicon_sizes.erase("obj");
  }
  if (config.max_len < 4) throw PipelineError("synthlang", "max sentence length must be >= 4");
  GrammarIndex idx = index_grammar(config);
  if (idx.nonterminals.size() < 3)
    throw PipelineError("synthlang", "grammar needs at least 3 nonterminals");
  if (idx.rules_of.find(config.start) == idx.rules_of.end())
    throw PipelineError("synthlang", "start symbol '" + config.start + "' has no rules");
  for (const auto& nt : idx.nonterminals) {
    if (idx.min_height.at(nt) >= kInf)
      throw PipelineError("synthlang",
                          "grammar cannot terminate: no terminal-only production reachable from '" +
                              nt + "'");
  }
  if (idx.min_height.at(config.start) > config.max_depth)
    throw PipelineError("synthlang", "max_depth too small for any derivation");
  for (const auto& rule : config.rules) {
    std::vector<int> sorted = rule.reorder;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sorted.size() == rule.rhs.size();
    for (size_t i = 0; ok && i < sorted.size(); ++i) ok = sorted[i] == static_cast<int>(i);
    if (!ok)
      throw PipelineError("synthlang", "rule for '" + rule.lhs + "' has an invalid reorder permutation");
  }
  for (const auto& [cls, size] : config.lexicon_sizes) {
    if (size < 1) throw PipelineError("synthlang", "empty lexicon class '" + cls + "'");
    if (!config.closed_classes.count(cls) && size < config.open_class_min)
      throw PipelineError("synthlang", "open class '" + cls + "' smaller than minimum lexicon size");
  }
  int max_len = max_derivable_length(config);
  if (max_len > config.max_len)
    throw PipelineError("synthlang", "grammar can derive length " + std::to_string(max_len) +
                                         " > max_len " + std::to_string(config.max_len) +
                                         "; lower max_depth or raise max_len");

  GrammarPair g;
  g.config = config;
  g.seed = seed;

  for (const auto& [cls, size] : config.lexicon_sizes) {
    std::vector<std::string> words;
    words.reserve(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) words.push_back(cls + std::to_string(i));
    g.src_lexicon[cls] = words;
  }

  // Disjoint target surface forms via a seeded within-class index permutation.
  Rng rng(derive_seed(seed, "lexicon-map"));
  for (const auto& [cls, words] : g.src_lexicon) {
    std::vector<size_t> perm(words.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    for (size_t i = 0; i < words.size(); ++i) {
      std::string tgt = "x" + cls + std::to_string(perm[i]);
      g.tgt_token_map[words[i]] = tgt;
      g.src_token_map[tgt] = words[i];
      g.word_class[words[i]] = cls;
    }
  }

  // per-word latents behind the selectional-preference sampling
  Rng trng(derive_seed(seed, "word-topics"));
  const size_t L = static_cast<size_t>(std::max(0, config.topic_dim));
  for (const auto& [cls, words] : g.src_lexicon) {
    for (const auto& w : words) {
      std::vector<double> u(L);
      for (auto& x : u) x = trng.normal();
      g.word_topics[w] = std::move(u);
    }
  }
  return g;
}

Words flatten_source(const Derivation& d) {
  Words out;
  flatten_source_into(d, out);
  return out;
}

Words flatten_target(const Derivation& d, const GrammarPair& g) {
  Words out;
  flatten_target_into(d, g, out);
  return out;
}

RawCorpus sample_monolingual(const GrammarPair& grammar, SampleSide side, size_t n, uint64_t seed) {
  if (n < 1) throw PipelineError("synthlang", "sample count must be >= 1");
  GrammarIndex idx = index_grammar(grammar.config);
  Rng rng(derive_seed(seed, "sample"));
  Sampler s{grammar, idx, rng, {}};
  RawCorpus out;
  out.sentences.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Derivation d = s.sample_sentence();
    if (side == SampleSide::Src) {
      out.sentences.push_back(flatten_source(d));
    } else {
      out.sentences.push_back(grammar.map_to_target(flatten_target(d, grammar)));
    }
  }
  return out;
}

namespace {

// Bottom-up chart parser over word classes. Spans are keyed (symbol, i, j);
// rule RHS sequences are matched with a per-rule position DP.
struct Parser {
  const GrammarPair& g;
  const GrammarIndex& idx;

  struct Entry {
    int rule = -1;
    std::vector<int> splits;  // child span boundaries, size rhs+1
  };
  std::map<std::string, std::vector<char>> has;      // sym -> span bitmap
  std::map<std::string, std::vector<Entry>> entry;   // sym -> span back-pointers
  size_t n = 0;

  bool derivable(const std::string& sym, size_t i, size_t j) const {
    auto it = has.find(sym);
    return it != has.end() && it->second[i * (n + 1) + j];
  }

  Derivation build(const std::string& sym, size_t i, size_t j, const Words& words) const {
    if (g.is_terminal_class(sym)) {
      Derivation leaf;
      leaf.word = words[i];
      return leaf;
    }
    const Entry& e = entry.at(sym)[i * (n + 1) + j];
    Derivation node;
    node.rule = e.rule;
    const auto& rule = g.config.rules[static_cast<size_t>(e.rule)];
    for (size_t c = 0; c < rule.rhs.size(); ++c)
      node.children.push_back(build(rule.rhs[c], static_cast<size_t>(e.splits[c]),
                                    static_cast<size_t>(e.splits[c + 1]), words));
    return node;
  }

  // Finds split points for rhs covering [i, j); returns false when no match.
  bool match_rhs(const std::vector<std::string>& rhs, size_t i, size_t j, std::vector<int>& splits) {
    if (rhs.empty()) return false;
    std::vector<std::vector<int>> reachable(rhs.size() + 1);
    std::vector<std::map<int, int>> parent(rhs.size() + 1);  // pos -> previous pos
    reachable[0] = {static_cast<int>(i)};
    for (size_t p = 0; p < rhs.size(); ++p) {
      for (int x : reachable[p]) {
        for (size_t y = static_cast<size_t>(x) + 1; y <= j; ++y) {
          if (!derivable(rhs[p], static_cast<size_t>(x), y)) continue;
          if (parent[p + 1].count(static_cast<int>(y))) continue;
          parent[p + 1][static_cast<int>(y)] = x;
          reachable[p + 1].push_back(static_cast<int>(y));
        }
      }
    }
    auto it = parent[rhs.size()].find(static_cast<int>(j));
    if (it == parent[rhs.size()].end()) return false;
    splits.assign(rhs.size() + 1, 0);
    int pos = static_cast<int>(j);
    for (size_t p = rhs.size(); p > 0; --p) {
      splits[p] = pos;
      pos = parent[p].at(pos);
    }
    splits[0] = static_cast<int>(i);
    return true;
  }

  void run(const Words& words) {
    n = words.size();
    std::vector<std::string> classes;
    for (const auto& w : words) {
      auto it = g.word_class.find(w);
      if (it == g.word_class.end()) throw ParseFailure("out-of-grammar token: " + w);
      classes.push_back(it->second);
    }
    for (const auto& [cls, _] : g.src_lexicon) has[cls].assign((n + 1) * (n + 1), 0);
    for (const auto& nt : idx.nonterminals) {
      has[nt].assign((n + 1) * (n + 1), 0);
      entry[nt].assign((n + 1) * (n + 1), Entry{});
    }
    for (size_t i = 0; i < n; ++i) has[classes[i]][i * (n + 1) + i + 1] = 1;

    for (size_t len = 1; len <= n; ++len) {
      for (size_t i = 0; i + len <= n; ++i) {
        size_t j = i + len;
        // fixpoint within the span to handle unary nonterminal chains
        bool changed = true;
        while (changed) {
          changed = false;
          for (size_t ri = 0; ri < g.config.rules.size(); ++ri) {
            const auto& rule = g.config.rules[ri];
            if (has[rule.lhs][i * (n + 1) + j]) continue;
            std::vector<int> splits;
            if (match_rhs(rule.rhs, i, j, splits)) {
              has[rule.lhs][i * (n + 1) + j] = 1;
              entry[rule.lhs][i * (n + 1) + j] = Entry{static_cast<int>(ri), splits};
              changed = true;
            }
          }
        }
      }
    }
  }
};

}  // namespace

Derivation parse(const Words& sentence, const GrammarPair& grammar) {
  if (sentence.empty()) throw ParseFailure("empty sentence");
  GrammarIndex idx = index_grammar(grammar.config);
  Parser p{grammar, idx, {}, {}, 0};
  p.run(sentence);
  if (!p.derivable(grammar.config.start, 0, sentence.size()))
    throw ParseFailure("sentence does not parse");
  return p.build(grammar.config.start, 0, sentence.size(), sentence);
}

Words oracle_reorder(const Words& sentence, const GrammarPair& grammar) {
  Derivation d = parse(sentence, grammar);
  return flatten_target(d, grammar);
}

ReorderResult inject_parse_failures(const GrammarPair& grammar, const RawCorpus& corpus,
                                    double fail_rate, uint64_t seed) {
  if (fail_rate < 0.0 || fail_rate >= 1.0)
    throw PipelineError("synthlang", "fail_rate must be in [0, 1)");
  ReorderResult out;
  out.reordered.sentences.reserve(corpus.sentences.size());
  Rng rng(derive_seed(seed, "parse-failures"));
  for (size_t i = 0; i < corpus.sentences.size(); ++i) {
    if (rng.bernoulli(fail_rate)) {
      out.failed_ids.insert(i);
      out.reordered.sentences.push_back(corpus.sentences[i]);  // kept only for index alignment
    } else {
      out.reordered.sentences.push_back(oracle_reorder(corpus.sentences[i], grammar));
    }
  }
  return out;
}

EvalSets make_eval_sets(const GrammarPair& grammar, size_t n_valid, size_t n_test, uint64_t seed) {
  if (n_valid < 1 || n_test < 1) throw PipelineError("synthlang", "eval set sizes must be >= 1");
  GrammarIndex idx = index_grammar(grammar.config);
  Rng rng(derive_seed(seed, "eval-sets"));
  Sampler s{grammar, idx, rng, {}};
  auto make = [&](size_t n) {
    std::vector<SentencePair> pairs;
    pairs.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      SentencePair p;
      p.derivation = s.sample_sentence();
      p.src = flatten_source(p.derivation);
      p.tgt = grammar.map_to_target(flatten_target(p.derivation, grammar));
      pairs.push_back(std::move(p));
    }
    return pairs;
  };
  EvalSets sets;
  sets.valid = make(n_valid);
  sets.test = make(n_test);
  return sets;
}

std::map<std::string, double> expected_class_frequencies(const GrammarPair& grammar) {
  const auto& cfg = grammar.config;
  GrammarIndex idx = index_grammar(cfg);
  // E[class-count] and E[length] per (symbol, budget), exact under the
  // sampler's depth-bounded renormalized rule distribution.
  std::map<std::pair<std::string, int>, std::map<std::string, double>> count_memo;
  std::map<std::pair<std::string, int>, double> len_memo;

  auto rec = [&](auto&& self, const std::string& sym, int budget) -> void {
    auto key = std::make_pair(sym, budget);
    if (len_memo.count(key)) return;
    if (cfg.lexicon_sizes.count(sym)) {
      len_memo[key] = 1.0;
      count_memo[key] = {{sym, 1.0}};
      return;
    }
    auto rules = allowed_rules(cfg, idx, sym, budget);
    double wsum = 0.0;
    for (size_t ri : rules) wsum += cfg.rules[ri].weight;
    double len = 0.0;
    std::map<std::string, double> counts;
    for (size_t ri : rules) {
      double p = cfg.rules[ri].weight / wsum;
      for (const auto& child : cfg.rules[ri].rhs) {
        self(self, child, budget - 1);
        auto ckey = std::make_pair(child, budget - 1);
        len += p * len_memo[ckey];
        for (const auto& [cls, c] : count_memo[ckey]) counts[cls] += p * c;
      }
    }
    len_memo[key] = len;
    count_memo[key] = counts;
  };
  rec(rec, cfg.start, cfg.max_depth);

  auto skey = std::make_pair(cfg.start, cfg.max_depth);
  double total = len_memo[skey];
  std::map<std::string, double> freq;
  for (const auto& [cls, c] : count_memo[skey]) freq[cls] = c / total;
  return freq;
}

void save_grammar(const GrammarPair& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("synthlang", "cannot write " + path);
  out << "unmtlab-grammar v1\n";
  out << "seed " << g.seed << "\n";
  out << "start " << g.config.start << "\n";
  out << "maxlen " << g.config.max_len << "\n";
  out << "maxdepth " << g.config.max_depth << "\n";
  out << "openmin " << g.config.open_class_min << "\n";
  out << "ambiguity " << (g.config.ambiguity_hooks ? 1 : 0) << "\n";
  out << "topics " << g.config.topic_dim << " " << g.config.topic_tau << "\n";
  for (const auto& r : g.config.rules) {
    out << "rule " << r.lhs << " " << r.rhs.size();
    for (const auto& s : r.rhs) out << " " << s;
    out << " " << r.weight;
    for (int p : r.reorder) out << " " << p;
    out << "\n";
  }
  for (const auto& [cls, size] : g.config.lexicon_sizes)
    out << "class " << cls << " " << size << " " << (g.config.closed_classes.count(cls) ? 1 : 0)
        << "\n";
  out.precision(17);
  for (const auto& [cls, words] : g.src_lexicon)
    for (const auto& w : words) {
      out << "word " << cls << " " << w << " " << g.tgt_token_map.at(w);
      for (double u : g.word_topics.at(w)) out << " " << u;
      out << "\n";
    }
}

GrammarPair load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("synthlang", "cannot read " + path);
  std::string header;
  std::getline(in, header);
  if (header != "unmtlab-grammar v1") throw PipelineError("synthlang", "bad grammar file header");
  GrammarPair g;
  std::string line;
  std::map<std::string, std::vector<std::string>> lex;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "seed") ss >> g.seed;
    else if (kind == "start") ss >> g.config.start;
    else if (kind == "maxlen") ss >> g.config.max_len;
    else if (kind == "maxdepth") ss >> g.config.max_depth;
    else if (kind == "openmin") ss >> g.config.open_class_min;
    else if (kind == "ambiguity") { int a = 0; ss >> a; g.config.ambiguity_hooks = a != 0; }
    else if (kind == "topics") { ss >> g.config.topic_dim >> g.config.topic_tau; }
    else if (kind == "rule") {
      Rule r;
      size_t k = 0;
      ss >> r.lhs >> k;
      r.rhs.resize(k);
      for (auto& s : r.rhs) ss >> s;
      ss >> r.weight;
      r.reorder.resize(k);
      for (auto& p : r.reorder) ss >> p;
      g.config.rules.push_back(r);
    } else if (kind == "class") {
      std::string cls;
      int sz = 0, closed = 0;
      ss >> cls >> sz >> closed;
      g.config.lexicon_sizes[cls] = sz;
      if (closed) g.config.closed_classes.insert(cls);
    } else if (kind == "word") {
      std::string cls, src, tgt;
      ss >> cls >> src >> tgt;
      lex[cls].push_back(src);
      g.tgt_token_map[src] = tgt;
      g.src_token_map[tgt] = src;
      g.word_class[src] = cls;
      std::vector<double> u;
      double x = 0;
      while (ss >> x) u.push_back(x);
      g.word_topics[src] = std::move(u);
    }
  }
  g.src_lexicon = lex;
  return g;
}

void save_corpus(const RawCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("synthlang", "cannot write " + path);
  for (const auto& sent : corpus.sentences) {
    for (size_t i = 0; i < sent.size(); ++i) {
      if (i) out << ' ';
      out << sent[i];
    }
    out << '\n';
  }
}

RawCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("synthlang", "cannot read " + path);
  RawCorpus c;
  std::string line;
  while (std::getline(in, line)) {
    Words w;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) w.push_back(tok);
    if (!w.empty()) c.sentences.push_back(std::move(w));
  }
  return c;
}

}  // namespace unmtlab::synthlang

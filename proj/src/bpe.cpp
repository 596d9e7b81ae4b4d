#include <unmtlab/bpe.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace unmtlab::bpe {

namespace {

using Pair = std::pair<std::string, std::string>;

std::vector<std::string> split_chars(const std::string& word) {
  // Treat UTF-8 multi-byte sequences as single symbols.
  std::vector<std::string> out;
  for (size_t i = 0; i < word.size();) {
    size_t len = 1;
    unsigned char c = static_cast<unsigned char>(word[i]);
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    out.push_back(word.substr(i, len));
    i += len;
  }
  return out;
}

void merge_in_place(std::vector<std::string>& symbols, const Pair& pair) {
  size_t w = 0;
  for (size_t r = 0; r < symbols.size();) {
    if (r + 1 < symbols.size() && symbols[r] == pair.first && symbols[r + 1] == pair.second) {
      symbols[w] = pair.first + pair.second;
      ++w;
      r += 2;
    } else {
      if (w != r) symbols[w] = std::move(symbols[r]);
      ++w;
      r += 1;
    }
  }
  symbols.resize(w);
}

}  // namespace

void BpeModel::rebuild_rank() {
  rank.clear();
  for (size_t i = 0; i < merges.size(); ++i) rank[merges[i]] = i;
}

BpeModel learn_bpe(const std::vector<Words>& corpora_sentences, size_t n_merges) {
  std::map<std::string, int64_t> word_freq;
  uint64_t fp = 0xcbf29ce484222325ULL;
  for (const auto& sent : corpora_sentences) {
    for (const auto& w : sent) {
      ++word_freq[w];
      fp = fnv1a64(w, fp);
      fp = fnv1a64(" ", fp);
    }
  }
  if (word_freq.empty()) throw PipelineError("corpus", "cannot learn BPE on an empty corpus");

  std::vector<std::pair<std::vector<std::string>, int64_t>> words;
  words.reserve(word_freq.size());
  for (const auto& [w, f] : word_freq) words.emplace_back(split_chars(w), f);

  BpeModel model;
  model.corpus_fingerprint = fp;
  for (size_t step = 0; step < n_merges; ++step) {
    std::map<Pair, int64_t> pair_freq;
    for (const auto& [symbols, f] : words)
      for (size_t i = 0; i + 1 < symbols.size(); ++i) pair_freq[{symbols[i], symbols[i + 1]}] += f;

    Pair best;
    int64_t best_count = 0;
    for (const auto& [p, c] : pair_freq) {
      // std::map iteration is lexicographic, so strict > keeps the smallest
      // pair on ties.
      if (c > best_count) {
        best_count = c;
        best = p;
      }
    }
    if (best_count < 2) break;  // no pair repeats
    model.merges.push_back(best);
    for (auto& [symbols, f] : words) merge_in_place(symbols, best);
  }
  model.rebuild_rank();
  return model;
}

std::vector<std::string> apply_bpe_word(const BpeModel& model, const std::string& word) {
  std::vector<std::string> symbols = split_chars(word);
  while (symbols.size() > 1) {
    size_t best_rank = model.merges.size();
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = model.rank.find({symbols[i], symbols[i + 1]});
      if (it != model.rank.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == model.merges.size()) break;
    merge_in_place(symbols, model.merges[best_rank]);
  }
  for (size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += "@@";
  return symbols;
}

Words apply_bpe(const BpeModel& model, const Words& sentence) {
  Words out;
  for (const auto& w : sentence) {
    auto pieces = apply_bpe_word(model, w);
    out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

Words detokenize(const Words& subwords) {
  Words out;
  std::string current;
  for (const auto& s : subwords) {
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "@@") == 0) {
      current += s.substr(0, s.size() - 2);
    } else {
      current += s;
      out.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(current);  // dangling continuation
  return out;
}

void save_bpe(const BpeModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("corpus", "cannot write " + path);
  for (const auto& [a, b] : model.merges) out << a << ' ' << b << '\n';
}

BpeModel load_bpe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("corpus", "cannot read " + path);
  BpeModel model;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b;
    ss >> a >> b;
    model.merges.emplace_back(a, b);
  }
  model.rebuild_rank();
  return model;
}

}  // namespace unmtlab::bpe

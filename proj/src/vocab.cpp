#include <unmtlab/vocab.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace unmtlab {

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>", "<mask>"}) add(s);
}

int32_t Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  int32_t id = static_cast<int32_t>(id_to_token_.size());
  id_to_token_.push_back(token);
  token_to_id_[token] = id;
  return id;
}

int32_t Vocab::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

TokenSeq Vocab::encode(const Words& words) const {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(encode(w));
  return out;
}

const std::string& Vocab::decode(int32_t id) const {
  if (id < 0 || id >= size()) throw PipelineError("corpus", "token id out of range");
  return id_to_token_[static_cast<size_t>(id)];
}

Words Vocab::decode(const TokenSeq& ids) const {
  Words out;
  out.reserve(ids.size());
  for (int32_t id : ids) out.push_back(decode(id));
  return out;
}

uint64_t Vocab::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : id_to_token_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw PipelineError("corpus", "cannot write " + path);
  for (size_t i = 0; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\t' << i << '\n';
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("corpus", "cannot read " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw PipelineError("corpus", "bad vocab line: " + line);
    std::string token = line.substr(0, tab);
    int32_t id = std::stoi(line.substr(tab + 1));
    if (id < kNumSpecials) continue;  // specials pre-seeded by the constructor
    int32_t got = v.add(token);
    if (got != id) throw PipelineError("corpus", "vocab ids not contiguous in " + path);
  }
  return v;
}

Vocab build_vocab(const std::vector<std::vector<Words>>& segmented_corpora, int64_t min_count) {
  std::map<std::string, int64_t> counts;
  for (const auto& corpus : segmented_corpora)
    for (const auto& sent : corpus)
      for (const auto& tok : sent) ++counts[tok];

  std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  for (const auto& [tok, c] : items)
    if (c >= min_count) v.add(tok);
  return v;
}

}  // namespace unmtlab

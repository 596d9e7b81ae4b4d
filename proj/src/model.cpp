#include <unmtlab/model.hpp>

#include <algorithm>
#include <cstring>

namespace unmtlab {

EncBatch make_enc_batch(const std::vector<TokenSeq>& seqs) {
  EncBatch b;
  b.batch = static_cast<int>(seqs.size());
  size_t maxlen = 0;
  for (const auto& s : seqs) maxlen = std::max(maxlen, s.size());
  b.len = static_cast<int>(maxlen);
  b.tokens.assign(seqs.size() * maxlen, Vocab::kPad);
  b.positions.assign(seqs.size() * maxlen, 0);
  for (size_t i = 0; i < seqs.size(); ++i) {
    b.lengths.push_back(static_cast<int32_t>(seqs[i].size()));
    for (size_t j = 0; j < seqs[i].size(); ++j) {
      b.tokens[i * maxlen + j] = seqs[i][j];
      b.positions[i * maxlen + j] = static_cast<int32_t>(j);
    }
  }
  return b;
}

DecBatch make_dec_batch_full(const std::vector<TokenSeq>& targets) {
  DecBatch b;
  b.batch = static_cast<int>(targets.size());
  size_t maxlen = 0;
  for (const auto& t : targets) maxlen = std::max(maxlen, t.size());
  b.len = static_cast<int>(maxlen);
  b.in_tokens.assign(targets.size() * maxlen, Vocab::kPad);
  b.positions.assign(targets.size() * maxlen, 0);
  b.targets.assign(targets.size() * maxlen, Vocab::kPad);
  b.target_mask.assign(targets.size() * maxlen, 0);
  for (size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    b.lengths.push_back(static_cast<int32_t>(t.size()));
    for (size_t j = 0; j < t.size(); ++j) {
      b.in_tokens[i * maxlen + j] = j == 0 ? Vocab::kBos : t[j - 1];
      b.positions[i * maxlen + j] = static_cast<int32_t>(j);
      b.targets[i * maxlen + j] = t[j];
      b.target_mask[i * maxlen + j] = 1;
    }
  }
  return b;
}

DecBatch make_dec_batch_fragment(const std::vector<TokenSeq>& fragments,
                                 const std::vector<std::vector<int>>& positions) {
  if (fragments.size() != positions.size())
    throw PipelineError("model", "fragment/position count mismatch");
  DecBatch b;
  b.batch = static_cast<int>(fragments.size());
  size_t maxlen = 0;
  for (const auto& f : fragments) maxlen = std::max(maxlen, f.size());
  b.len = static_cast<int>(maxlen);
  b.in_tokens.assign(fragments.size() * maxlen, Vocab::kPad);
  b.positions.assign(fragments.size() * maxlen, 0);
  b.targets.assign(fragments.size() * maxlen, Vocab::kPad);
  b.target_mask.assign(fragments.size() * maxlen, 0);
  for (size_t i = 0; i < fragments.size(); ++i) {
    const auto& f = fragments[i];
    if (positions[i].size() != f.size())
      throw PipelineError("model", "fragment/position length mismatch");
    b.lengths.push_back(static_cast<int32_t>(f.size()));
    for (size_t j = 0; j < f.size(); ++j) {
      b.in_tokens[i * maxlen + j] = j == 0 ? Vocab::kBos : f[j - 1];
      b.positions[i * maxlen + j] = positions[i][j];
      b.targets[i * maxlen + j] = f[j];
      b.target_mask[i * maxlen + j] = 1;
    }
  }
  return b;
}

namespace {

constexpr char kMagic[9] = "UNMTCK01";

template <typename T>
void write_tensor(std::ofstream& out, const Tensor<T>& t) {
  uint64_t rows = t.rows, cols = t.cols;
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(T)));
}

template <typename T>
Tensor<T> read_tensor(std::ifstream& in) {
  uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  Tensor<T> t(rows, cols);
  in.read(reinterpret_cast<char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  return t;
}

void write_string(std::ofstream& out, const std::string& s) {
  uint64_t n = s.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(s.data(), static_cast<std::streamsize>(n));
}

std::string read_string(std::ifstream& in) {
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

template <typename T>
void TransformerT<T>::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("model", "cannot write checkpoint " + path);
  out.write(kMagic, 8);
  uint32_t scalar_size = sizeof(T);
  int32_t fields[8] = {cfg.enc_layers, cfg.dec_layers, cfg.heads, cfg.d_model,
                       cfg.d_ffn,      cfg.max_positions, cfg.tied_output ? 1 : 0, 0};
  out.write(reinterpret_cast<const char*>(&scalar_size), sizeof(scalar_size));
  out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
  double dropout = cfg.dropout;
  out.write(reinterpret_cast<const char*>(&dropout), sizeof(dropout));
  out.write(reinterpret_cast<const char*>(&vocab_fingerprint), sizeof(vocab_fingerprint));
  write_tensor(out, tok_emb);
  auto params = const_cast<TransformerT<T>*>(this)->trainable_params();
  uint64_t n = params.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (auto* p : params) {
    write_string(out, p->name);
    write_tensor(out, p->value);
  }
}

template <typename T>
TransformerT<T> TransformerT<T>::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("model", "cannot read checkpoint " + path);
  char magic[9] = {};
  in.read(magic, 8);
  if (std::strcmp(magic, kMagic) != 0) throw PipelineError("model", "bad checkpoint magic");
  uint32_t scalar_size = 0;
  in.read(reinterpret_cast<char*>(&scalar_size), sizeof(scalar_size));
  if (scalar_size != sizeof(T)) throw PipelineError("model", "checkpoint scalar width mismatch");
  int32_t fields[8] = {};
  in.read(reinterpret_cast<char*>(fields), sizeof(fields));
  double dropout = 0;
  in.read(reinterpret_cast<char*>(&dropout), sizeof(dropout));
  ModelConfig cfg;
  cfg.enc_layers = fields[0];
  cfg.dec_layers = fields[1];
  cfg.heads = fields[2];
  cfg.d_model = fields[3];
  cfg.d_ffn = fields[4];
  cfg.max_positions = fields[5];
  cfg.tied_output = fields[6] != 0;
  cfg.dropout = dropout;
  uint64_t vocab_fp = 0;
  in.read(reinterpret_cast<char*>(&vocab_fp), sizeof(vocab_fp));
  Tensor<T> emb = read_tensor<T>(in);
  TransformerT<T> m = TransformerT<T>::build(cfg, emb, vocab_fp, /*seed=*/0);
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  auto params = m.trainable_params();
  if (n != params.size()) throw PipelineError("model", "checkpoint parameter count mismatch");
  for (auto* p : params) {
    std::string name = read_string(in);
    if (name != p->name) throw PipelineError("model", "checkpoint parameter order mismatch: " + name);
    Tensor<T> v = read_tensor<T>(in);
    if (v.rows != p->value.rows || v.cols != p->value.cols)
      throw PipelineError("model", "checkpoint parameter shape mismatch: " + name);
    p->value = std::move(v);
  }
  if (!in) throw PipelineError("model", "truncated checkpoint " + path);
  return m;
}

template void TransformerT<float>::save(const std::string&) const;
template TransformerT<float> TransformerT<float>::load(const std::string&);

}  // namespace unmtlab

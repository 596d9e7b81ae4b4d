#include <unmtlab/experiment.hpp>

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <unmtlab/bpe.hpp>
#include <unmtlab/corpus.hpp>
#include <unmtlab/metrics.hpp>
#include <unmtlab/noise.hpp>

namespace unmtlab::experiment {

using json = nlohmann::json;
namespace fs = std::filesystem;
using synthlang::RawCorpus;
using synthlang::Words;

namespace {

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

json trainer_to_json(const trainer::TrainConfig& t) {
  json j;
  j["epoch_size"] = t.epoch_size;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["batch_size"] = t.batching.batch_size;
  j["token_budget"] = t.batching.token_budget;
  j["lr"] = t.optim.lr;
  j["warmup"] = t.optim.warmup;
  j["clip"] = t.optim.clip;
  j["decode_max_len"] = t.decode_max_len;
  j["constrained_decode"] = t.constrained_decode;
  j["mix_pretraining_into_finetune"] = t.mix_pretraining_into_finetune;
  j["mass_ratio"] = t.noise.mass_ratio;
  j["shuffle_k"] = t.noise.shuffle_k;
  j["word_dropout"] = t.noise.word_dropout;
  j["word_blank"] = t.noise.word_blank;
  return j;
}

void trainer_from_json(const json& j, trainer::TrainConfig& t) {
  t.epoch_size = get_or(j, "epoch_size", t.epoch_size);
  t.max_epochs = get_or(j, "max_epochs", t.max_epochs);
  t.patience = get_or(j, "patience", t.patience);
  t.batching.batch_size = get_or(j, "batch_size", t.batching.batch_size);
  t.batching.token_budget = get_or(j, "token_budget", t.batching.token_budget);
  t.optim.lr = get_or(j, "lr", t.optim.lr);
  t.optim.warmup = get_or(j, "warmup", t.optim.warmup);
  t.optim.clip = get_or(j, "clip", t.optim.clip);
  t.decode_max_len = get_or(j, "decode_max_len", t.decode_max_len);
  t.constrained_decode = get_or(j, "constrained_decode", t.constrained_decode);
  t.mix_pretraining_into_finetune =
      get_or(j, "mix_pretraining_into_finetune", t.mix_pretraining_into_finetune);
  t.noise.mass_ratio = get_or(j, "mass_ratio", t.noise.mass_ratio);
  t.noise.shuffle_k = get_or(j, "shuffle_k", t.noise.shuffle_k);
  t.noise.word_dropout = get_or(j, "word_dropout", t.noise.word_dropout);
  t.noise.word_blank = get_or(j, "word_blank", t.noise.word_blank);
}

std::string join_words(const Words& w) {
  std::string line;
  for (size_t i = 0; i < w.size(); ++i) {
    if (i) line += ' ';
    line += w[i];
  }
  return line;
}

uint64_t file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PipelineError("prepare", "cannot hash missing file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  if (!out) throw PipelineError("prepare", "cannot write " + p.string());
  for (const auto& l : lines) out << l << '\n';
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw PipelineError("run", "cannot read " + p.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

std::vector<std::string> corpus_lines(const RawCorpus& c) {
  std::vector<std::string> out;
  out.reserve(c.sentences.size());
  for (const auto& s : c.sentences) out.push_back(join_words(s));
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name);
  c.master_seed = get_or<uint64_t>(j, "master_seed", c.master_seed);
  c.out_dir = get_or<std::string>(j, "out_dir", c.out_dir);
  c.words_per_open_class = get_or(j, "words_per_open_class", c.words_per_open_class);
  c.ambiguity_hooks = get_or(j, "ambiguity_hooks", c.ambiguity_hooks);
  c.topic_dim = get_or(j, "topic_dim", c.topic_dim);
  c.topic_tau = get_or(j, "topic_tau", c.topic_tau);
  c.train_per_side = get_or(j, "train_per_side", c.train_per_side);
  c.n_valid = get_or(j, "n_valid", c.n_valid);
  c.n_test = get_or(j, "n_test", c.n_test);
  c.fail_rate = get_or(j, "fail_rate", c.fail_rate);
  c.bpe_merges = get_or(j, "bpe_merges", c.bpe_merges);
  c.min_count = get_or(j, "min_count", c.min_count);
  if (j.contains("skipgram")) {
    const auto& sg = j["skipgram"];
    c.skipgram.dim = get_or(sg, "dim", c.skipgram.dim);
    c.skipgram.window = get_or(sg, "window", c.skipgram.window);
    c.skipgram.negatives = get_or(sg, "negatives", c.skipgram.negatives);
    c.skipgram.epochs = get_or(sg, "epochs", c.skipgram.epochs);
    c.skipgram.lr = get_or(sg, "lr", c.skipgram.lr);
  }
  c.refine_iters = get_or(j, "refine_iters", c.refine_iters);
  c.csls_k = get_or(j, "csls_k", c.csls_k);
  c.seed_dict_min = get_or(j, "seed_dict_min", c.seed_dict_min);
  c.seed_dict_fallback = get_or(j, "seed_dict_fallback", c.seed_dict_fallback);
  c.oracle_seed_fraction = get_or(j, "oracle_seed_fraction", c.oracle_seed_fraction);
  c.emb_scale = get_or(j, "emb_scale", c.emb_scale);
  if (j.contains("model")) {
    const auto& m = j["model"];
    c.model.enc_layers = get_or(m, "enc_layers", c.model.enc_layers);
    c.model.dec_layers = get_or(m, "dec_layers", c.model.dec_layers);
    c.model.heads = get_or(m, "heads", c.model.heads);
    c.model.d_model = get_or(m, "d_model", c.model.d_model);
    c.model.d_ffn = get_or(m, "d_ffn", c.model.d_ffn);
    c.model.max_positions = get_or(m, "max_positions", c.model.max_positions);
    c.model.dropout = get_or(m, "dropout", c.model.dropout);
  }
  if (j.contains("pretrain")) trainer_from_json(j["pretrain"], c.pretrain_cfg);
  if (j.contains("finetune")) trainer_from_json(j["finetune"], c.finetune_cfg);
  if (j.contains("grid_cells")) c.grid_cells = j["grid_cells"].get<std::vector<std::string>>();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("config", "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["name"] = name;
  j["master_seed"] = master_seed;
  j["out_dir"] = out_dir;
  j["words_per_open_class"] = words_per_open_class;
  j["ambiguity_hooks"] = ambiguity_hooks;
  j["topic_dim"] = topic_dim;
  j["topic_tau"] = topic_tau;
  j["train_per_side"] = train_per_side;
  j["n_valid"] = n_valid;
  j["n_test"] = n_test;
  j["fail_rate"] = fail_rate;
  j["bpe_merges"] = bpe_merges;
  j["min_count"] = min_count;
  j["skipgram"] = {{"dim", skipgram.dim},
                   {"window", skipgram.window},
                   {"negatives", skipgram.negatives},
                   {"epochs", skipgram.epochs},
                   {"lr", skipgram.lr}};
  j["refine_iters"] = refine_iters;
  j["csls_k"] = csls_k;
  j["seed_dict_min"] = seed_dict_min;
  j["seed_dict_fallback"] = seed_dict_fallback;
  j["oracle_seed_fraction"] = oracle_seed_fraction;
  j["emb_scale"] = emb_scale;
  j["model"] = {{"enc_layers", model.enc_layers}, {"dec_layers", model.dec_layers},
                {"heads", model.heads},           {"d_model", model.d_model},
                {"d_ffn", model.d_ffn},           {"max_positions", model.max_positions},
                {"dropout", model.dropout}};
  j["pretrain"] = trainer_to_json(pretrain_cfg);
  j["finetune"] = trainer_to_json(finetune_cfg);
  j["grid_cells"] = grid_cells;
  return j.dump(2);
}

uint64_t ExperimentConfig::config_hash() const { return fnv1a64(to_json_text()); }

uint64_t ExperimentConfig::data_hash() const {
  json j;
  j["name"] = name;
  j["master_seed"] = master_seed;
  j["words_per_open_class"] = words_per_open_class;
  j["ambiguity_hooks"] = ambiguity_hooks;
  j["topic_dim"] = topic_dim;
  j["topic_tau"] = topic_tau;
  j["train_per_side"] = train_per_side;
  j["n_valid"] = n_valid;
  j["n_test"] = n_test;
  j["fail_rate"] = fail_rate;
  j["bpe_merges"] = bpe_merges;
  j["min_count"] = min_count;
  return fnv1a64(j.dump());
}

uint64_t ExperimentConfig::embed_hash() const {
  json j;
  j["data_hash"] = data_hash();
  j["skipgram"] = {{"dim", skipgram.dim},
                   {"window", skipgram.window},
                   {"negatives", skipgram.negatives},
                   {"epochs", skipgram.epochs},
                   {"lr", skipgram.lr}};
  j["refine_iters"] = refine_iters;
  j["csls_k"] = csls_k;
  j["seed_dict_min"] = seed_dict_min;
  j["seed_dict_fallback"] = seed_dict_fallback;
  j["oracle_seed_fraction"] = oracle_seed_fraction;
  j["emb_scale"] = emb_scale;
  return fnv1a64(j.dump());
}

void ExperimentConfig::validate() const {
  if (n_test == 0 || n_valid == 0) throw PipelineError("config", "eval set sizes must be positive");
  if (train_per_side == 0) throw PipelineError("config", "train_per_side must be positive");
  if (skipgram.dim != model.d_model)
    throw PipelineError("config", "skipgram dim must equal model d_model (static embeddings)");
  model.validate();
  for (const auto& cell : grid_cells) {
    auto dash = cell.find('-');
    if (dash == std::string::npos) throw PipelineError("config", "bad grid cell name " + cell);
    trainer::parse_objective(cell.substr(0, dash));
    trainer::parse_variant(cell.substr(dash + 1));
  }
}

Layout layout_for(const ExperimentConfig& cfg) { return Layout{fs::path(cfg.out_dir) / cfg.name}; }

// ---------------------------------------------------------------- prepare --

void cmd_prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  Layout lay = layout_for(cfg);
  fs::create_directories(lay.prepare());
  const fs::path dir = lay.prepare();

  auto gcfg = synthlang::default_grammar_config(cfg.words_per_open_class);
  gcfg.ambiguity_hooks = cfg.ambiguity_hooks;
  gcfg.topic_dim = cfg.topic_dim;
  gcfg.topic_tau = cfg.topic_tau;
  auto grammar = synthlang::build_grammar(gcfg, derive_seed(cfg.master_seed, "grammar"));
  synthlang::save_grammar(grammar, (dir / "grammar.txt").string());

  auto src_raw = synthlang::sample_monolingual(grammar, synthlang::SampleSide::Src,
                                               cfg.train_per_side, derive_seed(cfg.master_seed, "mono-src"));
  auto tgt_raw = synthlang::sample_monolingual(grammar, synthlang::SampleSide::Tgt,
                                               cfg.train_per_side, derive_seed(cfg.master_seed, "mono-tgt"));
  auto evals = synthlang::make_eval_sets(grammar, cfg.n_valid, cfg.n_test,
                                         derive_seed(cfg.master_seed, "eval-sets"));

  // reordering with injected tool failures, then the removal protocol
  auto train_reorder = synthlang::inject_parse_failures(grammar, src_raw, cfg.fail_rate,
                                                        derive_seed(cfg.master_seed, "fail-train"));
  RawCorpus valid_src_raw, test_src_raw;
  for (const auto& p : evals.valid) valid_src_raw.sentences.push_back(p.src);
  for (const auto& p : evals.test) test_src_raw.sentences.push_back(p.src);
  auto valid_reorder = synthlang::inject_parse_failures(grammar, valid_src_raw, cfg.fail_rate,
                                                        derive_seed(cfg.master_seed, "fail-valid"));
  auto test_reorder = synthlang::inject_parse_failures(grammar, test_src_raw, cfg.fail_rate,
                                                       derive_seed(cfg.master_seed, "fail-test"));

  auto src_orig = filter_raw(src_raw, train_reorder.failed_ids);
  auto src_reord = filter_raw(train_reorder.reordered, train_reorder.failed_ids);
  if (src_orig.sentences.size() != src_reord.sentences.size())
    throw PipelineError("prepare", "noise removal left unequal corpus sizes");

  auto valid_pairs = filter_by_ids(evals.valid, valid_reorder.failed_ids);
  auto test_pairs = filter_by_ids(evals.test, test_reorder.failed_ids);
  auto valid_src_reord = filter_raw(valid_reorder.reordered, valid_reorder.failed_ids);
  auto test_src_reord = filter_raw(test_reorder.reordered, test_reorder.failed_ids);

  auto dump_pairs = [&](const std::vector<synthlang::SentencePair>& pairs, const std::string& stem) {
    std::vector<std::string> src, tgt;
    for (const auto& p : pairs) {
      src.push_back(join_words(p.src));
      tgt.push_back(join_words(p.tgt));
    }
    write_lines(dir / (stem + ".src.txt"), src);
    write_lines(dir / (stem + ".tgt.txt"), tgt);
  };
  write_lines(dir / "mono.src.txt", corpus_lines(src_orig));
  write_lines(dir / "mono.src_reordered.txt", corpus_lines(src_reord));
  write_lines(dir / "mono.tgt.txt", corpus_lines(tgt_raw));
  dump_pairs(valid_pairs, "valid");
  dump_pairs(test_pairs, "test");
  write_lines(dir / "valid.src_reordered.txt", corpus_lines(valid_src_reord));
  write_lines(dir / "test.src_reordered.txt", corpus_lines(test_src_reord));

  // joint BPE over both languages, then the shared vocabulary
  std::vector<Words> joint;
  for (const auto& s : src_orig.sentences) joint.push_back(s);
  for (const auto& s : tgt_raw.sentences) joint.push_back(s);
  auto bpe_model = bpe::learn_bpe(joint, cfg.bpe_merges);
  bpe::save_bpe(bpe_model, (dir / "bpe.codes").string());

  std::vector<std::vector<Words>> segmented;
  auto segment_corpus = [&](const RawCorpus& c) {
    std::vector<Words> seg;
    seg.reserve(c.sentences.size());
    for (const auto& s : c.sentences) seg.push_back(bpe::apply_bpe(bpe_model, s));
    return seg;
  };
  segmented.push_back(segment_corpus(src_orig));
  segmented.push_back(segment_corpus(src_reord));
  segmented.push_back(segment_corpus(tgt_raw));
  auto vocab = build_vocab(segmented, cfg.min_count);
  vocab.save((dir / "vocab.tsv").string());

  json manifest;
  manifest["config_hash"] = cfg.data_hash();
  manifest["master_seed"] = cfg.master_seed;
  manifest["bpe_fingerprint"] = bpe_model.corpus_fingerprint;
  manifest["vocab_fingerprint"] = vocab.fingerprint();
  manifest["counts"] = {{"mono_src", src_orig.sentences.size()},
                        {"mono_src_reordered", src_reord.sentences.size()},
                        {"mono_tgt", tgt_raw.sentences.size()},
                        {"train_failed", train_reorder.failed_ids.size()},
                        {"valid", valid_pairs.size()},
                        {"test", test_pairs.size()}};
  json files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename() == "manifest.json") continue;
    files[entry.path().filename().string()] = file_hash(entry.path());
  }
  manifest["files"] = files;
  std::ofstream mout(dir / "manifest.json");
  mout << manifest.dump(2) << '\n';
}

// -------------------------------------------------------------------- run --

namespace {

struct PreparedData {
  synthlang::GrammarPair grammar;
  bpe::BpeModel bpe_model;
  Vocab vocab;
  // encoded corpora
  Corpus src_orig, src_reord, tgt;
  // eval text and encodings
  std::vector<std::string> valid_src_lines, valid_tgt_lines, test_src_lines, test_tgt_lines;
  std::vector<std::string> valid_src_reord_lines, test_src_reord_lines;
};

std::vector<TokenSeq> encode_lines(const PreparedData& d, const std::vector<std::string>& lines) {
  std::vector<TokenSeq> out;
  out.reserve(lines.size());
  for (const auto& line : lines) {
    Words w;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) w.push_back(tok);
    out.push_back(d.vocab.encode(bpe::apply_bpe(d.bpe_model, w)));
  }
  return out;
}

Corpus encode_raw(const PreparedData& d, const std::vector<std::string>& lines, Side side,
                  const std::string& provenance) {
  std::vector<Words> segmented;
  segmented.reserve(lines.size());
  for (const auto& line : lines) {
    Words w;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) w.push_back(tok);
    segmented.push_back(bpe::apply_bpe(d.bpe_model, w));
  }
  return encode_corpus(d.vocab, segmented, side, provenance);
}

PreparedData load_prepared(const ExperimentConfig& cfg) {
  Layout lay = layout_for(cfg);
  const fs::path dir = lay.prepare();
  if (!fs::exists(dir / "manifest.json"))
    throw PipelineError("run", "missing prepared data; run `prepare` first");
  {
    std::ifstream min(dir / "manifest.json");
    json manifest = json::parse(min);
    if (uint64_t(manifest["config_hash"]) != cfg.data_hash())
      throw PipelineError("run", "config hash does not match the prepared manifest");
  }
  PreparedData d;
  d.grammar = synthlang::load_grammar((dir / "grammar.txt").string());
  d.bpe_model = bpe::load_bpe((dir / "bpe.codes").string());
  d.vocab = Vocab::load((dir / "vocab.tsv").string());
  d.valid_src_lines = read_lines(dir / "valid.src.txt");
  d.valid_tgt_lines = read_lines(dir / "valid.tgt.txt");
  d.test_src_lines = read_lines(dir / "test.src.txt");
  d.test_tgt_lines = read_lines(dir / "test.tgt.txt");
  d.valid_src_reord_lines = read_lines(dir / "valid.src_reordered.txt");
  d.test_src_reord_lines = read_lines(dir / "test.src_reordered.txt");
  d.src_orig = encode_raw(d, read_lines(dir / "mono.src.txt"), Side::Src, "mono.src");
  d.src_reord = encode_raw(d, read_lines(dir / "mono.src_reordered.txt"), Side::SrcReordered,
                           "mono.src_reordered");
  d.tgt = encode_raw(d, read_lines(dir / "mono.tgt.txt"), Side::Tgt, "mono.tgt");
  return d;
}

// oracle word pairs (single-token after BPE on both sides), seeded shuffle,
// truncated to the held-out seeding fraction
std::vector<std::pair<int32_t, int32_t>> oracle_token_pairs(const PreparedData& d,
                                                            double fraction, uint64_t seed) {
  std::vector<std::pair<int32_t, int32_t>> all;
  for (const auto& [src_word, tgt_word] : d.grammar.tgt_token_map) {
    auto s = bpe::apply_bpe_word(d.bpe_model, src_word);
    auto t = bpe::apply_bpe_word(d.bpe_model, tgt_word);
    if (s.size() != 1 || t.size() != 1) continue;
    int32_t si = d.vocab.encode(s[0]);
    int32_t ti = d.vocab.encode(t[0]);
    if (si == Vocab::kUnk || ti == Vocab::kUnk) continue;
    all.emplace_back(si, ti);
  }
  std::sort(all.begin(), all.end());
  Rng rng(derive_seed(seed, "oracle-pairs"));
  for (size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.uniform_index(i)]);
  size_t keep = std::max<size_t>(1, static_cast<size_t>(fraction * double(all.size())));
  all.resize(std::min(all.size(), keep));
  return all;
}

std::set<int32_t> side_tokens(const Corpus& c) {
  std::set<int32_t> out;
  for (const auto& s : c.sentences) out.insert(s.begin(), s.end());
  return out;
}

// Trains (or reuses) the static cross-lingual embeddings for one variant.
TensorF ensure_embeddings(const ExperimentConfig& cfg, const PreparedData& d,
                          trainer::Variant variant) {
  Layout lay = layout_for(cfg);
  const std::string vname = trainer::variant_name(variant);
  const fs::path dir = lay.embed(vname);
  fs::create_directories(dir);
  const fs::path vec_path = dir / "embeddings.vec";
  const fs::path stamp_path = dir / "stamp.json";
  if (fs::exists(vec_path) && fs::exists(stamp_path)) {
    std::ifstream sin(stamp_path);
    json stamp = json::parse(sin);
    if (uint64_t(stamp["config_hash"]) == cfg.embed_hash())
      return xembed::load_embeddings_word2vec(d.vocab, vec_path.string());
  }

  const Corpus& src = variant == trainer::Variant::Original ? d.src_orig : d.src_reord;
  std::vector<TokenSeq> combined;
  combined.reserve(src.sentences.size() + d.tgt.sentences.size());
  for (const auto& s : src.sentences) combined.push_back(s);
  for (const auto& s : d.tgt.sentences) combined.push_back(s);

  uint64_t seed = derive_seed(cfg.master_seed, "embed", vname);
  auto emb = xembed::train_skipgram(combined, d.vocab.size(), cfg.skipgram, seed);

  auto src_set = side_tokens(src);
  auto tgt_set = side_tokens(d.tgt);
  auto oracle = oracle_token_pairs(d, cfg.oracle_seed_fraction, cfg.master_seed);
  auto dict = xembed::seed_dictionary(src_set, tgt_set, oracle, cfg.seed_dict_min,
                                      cfg.seed_dict_fallback);
  auto map = xembed::procrustes_align(emb, emb, dict);
  if (cfg.refine_iters > 0) {
    std::vector<int32_t> src_ids(src_set.begin(), src_set.end());
    std::vector<int32_t> tgt_ids(tgt_set.begin(), tgt_set.end());
    map = xembed::self_learning_refine(emb, src_ids, tgt_ids, map, cfg.refine_iters, cfg.csls_k);
  }
  auto exported = xembed::export_static_embeddings(emb, map, src_set, cfg.emb_scale, seed);
  xembed::save_embeddings_word2vec(exported, d.vocab, vec_path.string());
  xembed::save_alignment(map, (dir / "alignment.txt").string());
  json stamp;
  stamp["config_hash"] = cfg.embed_hash();
  stamp["dict_size"] = map.dict_size;
  stamp["orthogonality_error"] = xembed::orthogonality_error(map.w);
  std::ofstream sout(stamp_path);
  sout << stamp.dump(2) << '\n';
  return exported;
}

trainer::CellData make_cell_data(const PreparedData& d, trainer::Variant variant) {
  trainer::CellData cd;
  const bool reordered = variant == trainer::Variant::Reordered;
  cd.src_mono = reordered ? d.src_reord : d.src_orig;
  cd.tgt_mono = d.tgt;
  const auto& valid_src_lines = reordered ? d.valid_src_reord_lines : d.valid_src_lines;
  const auto& test_src_lines = reordered ? d.test_src_reord_lines : d.test_src_lines;

  cd.valid_src = encode_lines(d, valid_src_lines);
  cd.valid_tgt = encode_lines(d, d.valid_tgt_lines);

  auto word_lengths = [](const std::vector<std::string>& lines) {
    std::vector<int> out;
    for (const auto& l : lines) {
      int n = 0;
      std::istringstream ss(l);
      std::string t;
      while (ss >> t) ++n;
      out.push_back(n);
    }
    return out;
  };

  cd.valid_s2t = {encode_lines(d, valid_src_lines), d.valid_tgt_lines, word_lengths(valid_src_lines)};
  cd.valid_t2s = {cd.valid_tgt, d.valid_src_lines, word_lengths(d.valid_tgt_lines)};
  cd.test_s2t = {encode_lines(d, test_src_lines), d.test_tgt_lines, word_lengths(test_src_lines)};
  cd.test_t2s = {encode_lines(d, d.test_tgt_lines), d.test_src_lines, word_lengths(d.test_tgt_lines)};

  cd.src_allowed = trainer::allowed_mask(cd.src_mono, d.vocab.size());
  cd.tgt_allowed = trainer::allowed_mask(cd.tgt_mono, d.vocab.size());
  return cd;
}

struct CellSpec {
  std::string name;
  trainer::Objective objective;
  trainer::Variant variant;
};

CellSpec parse_cell(const std::string& cell) {
  auto dash = cell.find('-');
  if (dash == std::string::npos) throw PipelineError("run", "bad cell name " + cell);
  return CellSpec{cell, trainer::parse_objective(cell.substr(0, dash)),
                  trainer::parse_variant(cell.substr(dash + 1))};
}

void evaluate_cell(const ExperimentConfig& cfg, const PreparedData& d, const CellSpec& spec,
                   const Model& model, const trainer::CellData& cd, const fs::path& run_dir) {
  const bool reordered = spec.variant == trainer::Variant::Reordered;
  const std::vector<char>* src_allowed =
      cfg.finetune_cfg.constrained_decode ? &cd.src_allowed : nullptr;
  const std::vector<char>* tgt_allowed =
      cfg.finetune_cfg.constrained_decode ? &cd.tgt_allowed : nullptr;
  const int max_len = cfg.finetune_cfg.decode_max_len;

  auto hyps_s2t = trainer::translate_corpus(model, d.vocab, cd.test_s2t.inputs, tgt_allowed, max_len);
  write_lines(run_dir / "test.hyp_s2t.txt", hyps_s2t);
  double bleu_s2t = metrics::bleu(hyps_s2t, cd.test_s2t.references);
  double chrf_s2t = metrics::chrf(hyps_s2t, cd.test_s2t.references);

  json report;
  report["cell"] = spec.name;
  report["objective"] = trainer::objective_name(spec.objective);
  report["variant"] = trainer::variant_name(spec.variant);
  report["bleu_s2t"] = bleu_s2t;
  report["chrf_s2t"] = chrf_s2t;
  report["config_hash"] = cfg.config_hash();
  report["master_seed"] = cfg.master_seed;
  report["checkpoint"] = (run_dir / "finetune.ckpt").string();

  if (!reordered) {
    auto hyps_t2s = trainer::translate_corpus(model, d.vocab, cd.test_t2s.inputs, src_allowed, max_len);
    write_lines(run_dir / "test.hyp_t2s.txt", hyps_t2s);
    report["bleu_t2s"] = metrics::bleu(hyps_t2s, cd.test_t2s.references);
    report["chrf_t2s"] = metrics::chrf(hyps_t2s, cd.test_t2s.references);
  } else {
    report["bleu_t2s"] = nullptr;  // reordered models are one-direction systems
    report["chrf_t2s"] = nullptr;
  }

  // length-stratified BLEU over source word lengths
  std::vector<int> edges = {1, 6, 11, 16, 31};
  auto bins = metrics::bleu_by_length(hyps_s2t, cd.test_s2t.references, cd.test_s2t.source_lengths,
                                      edges);
  json jbins = json::array();
  for (const auto& b : bins)
    jbins.push_back({{"lo", b.lo},
                     {"hi", b.hi},
                     {"count", b.count},
                     {"bleu", b.bleu},
                     {"low_confidence", b.low_confidence}});
  report["bleu_by_length"] = jbins;

  // position-embedding similarity with a threshold sweep
  json widths;
  for (double tau : {0.3, 0.5, 0.7}) {
    auto sim = analysis::position_similarity(model.enc_pos.value, cfg.model.max_positions, tau);
    widths[std::to_string(tau).substr(0, 3)] = sim.neighborhood_width;
    if (tau == 0.5) {
      analysis::write_matrix_csv(sim.matrix, (run_dir / "posemb_similarity.csv").string());
      analysis::write_heatmap_svg(sim.matrix, (run_dir / "posemb_similarity.svg").string(),
                                  spec.name + " position-embedding cosine similarity");
    }
  }
  report["neighborhood_width"] = widths;

  std::ofstream out(run_dir / "eval_report.json");
  out << report.dump(2) << '\n';
}

void run_cell(const ExperimentConfig& cfg, const PreparedData& d, const std::string& cell) {
  CellSpec spec = parse_cell(cell);
  Layout lay = layout_for(cfg);
  const fs::path run_dir = lay.run(cell);
  fs::create_directories(run_dir);

  TensorF emb = ensure_embeddings(cfg, d, spec.variant);
  trainer::CellData cd = make_cell_data(d, spec.variant);

  const std::string vname = trainer::variant_name(spec.variant);
  trainer::TrainConfig pre = cfg.pretrain_cfg;
  pre.objective = spec.objective;
  pre.variant = spec.variant;
  pre.seed = derive_seed(cfg.master_seed, "train", vname);
  trainer::TrainConfig fine = cfg.finetune_cfg;
  fine.objective = spec.objective;
  fine.variant = spec.variant;
  fine.noise = pre.noise;
  fine.seed = derive_seed(cfg.master_seed, "finetune", vname);

  const fs::path pre_ckpt = run_dir / "pretrain.ckpt";
  const fs::path fine_ckpt = run_dir / "finetune.ckpt";

  Model model = build_model(cfg.model, emb, d.vocab.fingerprint(),
                            derive_seed(cfg.master_seed, "model", vname));
  if (fs::exists(pre_ckpt)) {
    Model loaded = Model::load(pre_ckpt.string());
    if (loaded.vocab_fingerprint != d.vocab.fingerprint())
      throw PipelineError("run", "pretrain checkpoint does not match the prepared vocabulary");
    model = std::move(loaded);
    std::cout << "[" << cell << "] reusing " << pre_ckpt.string() << "\n";
  } else {
    std::cout << "[" << cell << "] pretraining (" << trainer::objective_name(spec.objective)
              << ", " << vname << ")\n";
    auto record = trainer::pretrain(model, d.vocab, cd, pre);
    model.save(pre_ckpt.string());
    trainer::save_run_record(record, (run_dir / "pretrain_record.jsonl").string());
  }

  if (fs::exists(fine_ckpt)) {
    std::cout << "[" << cell << "] reusing " << fine_ckpt.string() << "\n";
    Model loaded = Model::load(fine_ckpt.string());
    model = std::move(loaded);
  } else {
    std::cout << "[" << cell << "] fine-tuning with iterative back-translation\n";
    auto record = trainer::finetune_backtranslation(model, d.vocab, cd, fine);
    model.save(fine_ckpt.string());
    trainer::save_run_record(record, (run_dir / "finetune_record.jsonl").string());
  }

  evaluate_cell(cfg, d, spec, model, cd, run_dir);
  std::cout << "[" << cell << "] evaluation written\n";
}

}  // namespace

void cmd_run(const ExperimentConfig& cfg, std::vector<std::string> cells) {
  if (cells.empty()) cells = cfg.grid_cells;
  PreparedData d = load_prepared(cfg);
  for (const auto& cell : cells) run_cell(cfg, d, cell);
}

void cmd_evaluate(const ExperimentConfig& cfg, std::vector<std::string> cells) {
  if (cells.empty()) cells = cfg.grid_cells;
  PreparedData d = load_prepared(cfg);
  Layout lay = layout_for(cfg);
  for (const auto& cell : cells) {
    CellSpec spec = parse_cell(cell);
    const fs::path run_dir = lay.run(cell);
    const fs::path ckpt = run_dir / "finetune.ckpt";
    if (!fs::exists(ckpt)) throw PipelineError("evaluate", "missing checkpoint for cell " + cell);
    Model model = Model::load(ckpt.string());
    trainer::CellData cd = make_cell_data(d, spec.variant);
    evaluate_cell(cfg, d, spec, model, cd, run_dir);
  }
}

analysis::CellResult load_cell_result(const ExperimentConfig& cfg, const std::string& cell) {
  Layout lay = layout_for(cfg);
  std::ifstream in(lay.run(cell) / "eval_report.json");
  if (!in) throw PipelineError("report", "missing eval report for cell " + cell);
  json j = json::parse(in);
  analysis::CellResult r;
  r.objective = j["objective"];
  r.variant = j["variant"];
  r.bleu_s2t = double(j["bleu_s2t"]);
  r.chrf_s2t = double(j["chrf_s2t"]);
  if (!j["bleu_t2s"].is_null()) r.bleu_t2s = double(j["bleu_t2s"]);
  if (!j["chrf_t2s"].is_null()) r.chrf_t2s = double(j["chrf_t2s"]);
  return r;
}

void cmd_report(const ExperimentConfig& cfg) {
  Layout lay = layout_for(cfg);
  fs::create_directories(lay.report());

  std::vector<analysis::CellResult> cells;
  for (const auto& cell : cfg.grid_cells) {
    try {
      cells.push_back(load_cell_result(cfg, cell));
    } catch (const PipelineError&) {
      // missing cells render as missing rows
    }
  }
  std::string table = analysis::render_comparison_table(cells);
  std::ofstream tout(lay.report() / "comparison.txt");
  tout << table;
  std::ofstream cout_(lay.report() / "comparison.csv");
  cout_ << analysis::comparison_csv(cells);
  std::cout << table;

  // BLEU-vs-epoch curves from the fine-tuning records
  std::vector<analysis::Curve> curves;
  for (const auto& cell : cfg.grid_cells) {
    fs::path rec = lay.run(cell) / "finetune_record.jsonl";
    if (!fs::exists(rec)) continue;
    auto record = trainer::load_run_record(rec.string());
    analysis::Curve c;
    c.name = cell + " (S->T)";
    for (const auto& e : record.epochs) c.values.push_back(e.bleu_s2t.value_or(0.0));
    curves.push_back(std::move(c));
  }
  if (!curves.empty()) {
    analysis::write_curves_csv(curves, (lay.report() / "bleu_curves.csv").string());
    analysis::write_curves_svg(curves, (lay.report() / "bleu_curves.svg").string(),
                               "validation BLEU by fine-tuning epoch");
  }

  // re-render the position heatmaps that the evaluate stage produced
  for (const auto& cell : cfg.grid_cells) {
    fs::path csv = lay.run(cell) / "posemb_similarity.csv";
    if (!fs::exists(csv)) continue;
    fs::copy_file(csv, lay.report() / (cell + ".posemb.csv"), fs::copy_options::overwrite_existing);
    fs::path svg = lay.run(cell) / "posemb_similarity.svg";
    if (fs::exists(svg))
      fs::copy_file(svg, lay.report() / (cell + ".posemb.svg"), fs::copy_options::overwrite_existing);
  }
}

void cmd_noise_debug(const ExperimentConfig& cfg, const std::string& objective, size_t n,
                     uint64_t seed, std::ostream& out) {
  auto gcfg = synthlang::default_grammar_config(cfg.words_per_open_class);
  gcfg.ambiguity_hooks = cfg.ambiguity_hooks;
  gcfg.topic_dim = cfg.topic_dim;
  gcfg.topic_tau = cfg.topic_tau;
  auto grammar = synthlang::build_grammar(gcfg, derive_seed(cfg.master_seed, "grammar"));
  auto raw = synthlang::sample_monolingual(grammar, synthlang::SampleSide::Src, n, seed);

  std::vector<Words> joint(raw.sentences.begin(), raw.sentences.end());
  auto bm = bpe::learn_bpe(joint, cfg.bpe_merges);
  std::vector<std::vector<Words>> seg(1);
  for (const auto& s : raw.sentences) seg[0].push_back(bpe::apply_bpe(bm, s));
  auto vocab = build_vocab(seg, 1);

  trainer::Objective obj = trainer::parse_objective(objective);
  noise::NoiseSpec spec = cfg.pretrain_cfg.noise;
  for (size_t i = 0; i < raw.sentences.size(); ++i) {
    TokenSeq toks = vocab.encode(seg[0][i]);
    uint64_t s = derive_seed(seed, "noise-debug", std::to_string(i));
    std::string original = join_words(vocab.decode(toks));
    std::string corrupted, target;
    if (obj == trainer::Objective::Mass) {
      auto ex = noise::mass_mask(toks, spec, vocab, s);
      corrupted = join_words(vocab.decode(ex.corrupted_input));
      target = join_words(vocab.decode(ex.target_fragment));
    } else {
      auto ex = noise::dae_noise(toks, spec, vocab, s);
      corrupted = join_words(vocab.decode(ex.corrupted));
      target = join_words(vocab.decode(ex.target));
    }
    out << original << '\t' << corrupted << '\t' << target << '\n';
  }
}

std::vector<analysis::CellResult> run_grid(const ExperimentConfig& cfg,
                                           std::vector<std::string> cells) {
  if (cells.empty()) cells = cfg.grid_cells;
  Layout lay = layout_for(cfg);
  if (!fs::exists(lay.prepare() / "manifest.json")) cmd_prepare(cfg);
  cmd_run(cfg, cells);
  std::vector<analysis::CellResult> out;
  for (const auto& cell : cells) out.push_back(load_cell_result(cfg, cell));
  return out;
}

}  // namespace unmtlab::experiment

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <unmtlab/bpe.hpp>
#include <unmtlab/synthlang.hpp>
#include <unmtlab/trainer.hpp>
#include <unmtlab/xembed.hpp>

using namespace unmtlab;
using namespace unmtlab::trainer;

namespace {

// Minimal prepared cell: tiny grammar, word-level vocab (no BPE needed for
// these smoke tests), random-normal embeddings.
struct TinySetup {
  synthlang::GrammarPair grammar;
  Vocab vocab;
  CellData cell;
  Model model;
  ModelConfig mcfg;

  static TinySetup make(uint64_t seed, size_t n_mono = 300) {
    TinySetup s;
    auto gcfg = synthlang::default_grammar_config(12);
    gcfg.topic_tau = 2.0;
    s.grammar = synthlang::build_grammar(gcfg, seed);
    auto src = synthlang::sample_monolingual(s.grammar, synthlang::SampleSide::Src, n_mono, seed + 1);
    auto tgt = synthlang::sample_monolingual(s.grammar, synthlang::SampleSide::Tgt, n_mono, seed + 2);
    auto evals = synthlang::make_eval_sets(s.grammar, 20, 20, seed + 3);

    std::vector<std::vector<Words>> all = {src.sentences, tgt.sentences};
    s.vocab = build_vocab(all, 1);

    auto enc = [&](const std::vector<Words>& lines) {
      std::vector<TokenSeq> out;
      for (const auto& l : lines) out.push_back(s.vocab.encode(l));
      return out;
    };
    s.cell.src_mono = Corpus{enc(src.sentences), Side::Src, "src"};
    s.cell.tgt_mono = Corpus{enc(tgt.sentences), Side::Tgt, "tgt"};

    std::vector<Words> vsrc, vtgt;
    std::vector<std::string> vsrc_lines, vtgt_lines;
    auto join = [](const Words& w) {
      std::string l;
      for (size_t i = 0; i < w.size(); ++i) {
        if (i) l += ' ';
        l += w[i];
      }
      return l;
    };
    for (const auto& p : evals.valid) {
      vsrc.push_back(p.src);
      vtgt.push_back(p.tgt);
      vsrc_lines.push_back(join(p.src));
      vtgt_lines.push_back(join(p.tgt));
    }
    s.cell.valid_src = enc(vsrc);
    s.cell.valid_tgt = enc(vtgt);
    s.cell.valid_s2t = {s.cell.valid_src, vtgt_lines, {}};
    s.cell.valid_t2s = {s.cell.valid_tgt, vsrc_lines, {}};
    s.cell.test_s2t = s.cell.valid_s2t;
    s.cell.test_t2s = s.cell.valid_t2s;
    s.cell.src_allowed = allowed_mask(s.cell.src_mono, s.vocab.size());
    s.cell.tgt_allowed = allowed_mask(s.cell.tgt_mono, s.vocab.size());

    s.mcfg = ModelConfig{2, 2, 2, 32, 64, 40, 0.0, true};
    Rng rng(seed + 9);
    TensorF emb(size_t(s.vocab.size()), 32);
    for (auto& v : emb.data) v = float(rng.normal() * 0.3);
    s.model = Model::build(s.mcfg, emb, s.vocab.fingerprint(), seed + 10);
    return s;
  }
};

TrainConfig fast_config() {
  TrainConfig cfg;
  cfg.epoch_size = 10;
  cfg.max_epochs = 1;
  cfg.patience = 1;
  cfg.batching.batch_size = 8;
  cfg.optim.warmup = 20;
  cfg.decode_max_len = 20;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("allowed_mask marks observed tokens plus eos only") {
  Vocab v = build_vocab({{{"aa", "bb"}, {"cc"}}}, 1);
  Corpus c;
  c.sentences = {{v.encode(std::string("aa"))}, {v.encode(std::string("cc"))}};
  auto mask = allowed_mask(c, v.size());
  CHECK(mask[size_t(v.encode(std::string("aa")))] == 1);
  CHECK(mask[size_t(v.encode(std::string("cc")))] == 1);
  CHECK(mask[size_t(v.encode(std::string("bb")))] == 0);
  CHECK(mask[Vocab::kEos] == 1);
  CHECK(mask[Vocab::kPad] == 0);
}

TEST_CASE("pretrain bookkeeping: one epoch of ten steps, record shape") {
  auto s = TinySetup::make(31);
  auto cfg = fast_config();
  auto record = pretrain(s.model, s.vocab, s.cell, cfg);
  CHECK(record.total_steps == 10);
  REQUIRE(record.epochs.size() == 1);
  CHECK(record.epochs[0].epoch == 0);
  CHECK(std::isfinite(record.epochs[0].train_loss));
  CHECK(record.stage == "pretrain");
}

TEST_CASE("DAE pretraining beats the uniform baseline after one epoch") {
  auto s = TinySetup::make(32);
  auto cfg = fast_config();
  cfg.objective = Objective::Dae;
  cfg.epoch_size = 150;
  cfg.optim.warmup = 50;
  auto record = pretrain(s.model, s.vocab, s.cell, cfg);
  double uniform = std::log(double(s.vocab.size()));
  CHECK(record.epochs[0].valid_loss < uniform);
}

TEST_CASE("MASS pretraining works and improves over steps") {
  auto s = TinySetup::make(33);
  auto cfg = fast_config();
  cfg.objective = Objective::Mass;
  cfg.epoch_size = 80;
  cfg.max_epochs = 2;
  cfg.patience = 2;
  auto record = pretrain(s.model, s.vocab, s.cell, cfg);
  REQUIRE(record.epochs.size() == 2);
  CHECK(record.epochs[1].valid_loss < record.epochs[0].valid_loss);
}

TEST_CASE("frozen embeddings survive both stages") {
  auto s = TinySetup::make(34);
  uint64_t before = s.model.embedding_checksum();
  auto cfg = fast_config();
  pretrain(s.model, s.vocab, s.cell, cfg);
  CHECK(s.model.embedding_checksum() == before);
  cfg.max_epochs = 1;
  cfg.epoch_size = 4;
  finetune_backtranslation(s.model, s.vocab, s.cell, cfg);
  CHECK(s.model.embedding_checksum() == before);
}

TEST_CASE("finetune records an epoch-0 row before any update") {
  auto s = TinySetup::make(35);
  auto cfg = fast_config();
  cfg.epoch_size = 4;
  auto record = finetune_backtranslation(s.model, s.vocab, s.cell, cfg);
  REQUIRE(!record.epochs.empty());
  CHECK(record.epochs[0].epoch == 0);
  CHECK(record.epochs[0].bleu_s2t.has_value());
  CHECK(record.stage == "finetune");
}

TEST_CASE("reordered runs never evaluate the tgt->src direction") {
  auto s = TinySetup::make(36);
  auto cfg = fast_config();
  cfg.epoch_size = 4;
  cfg.variant = Variant::Reordered;
  auto record = finetune_backtranslation(s.model, s.vocab, s.cell, cfg);
  for (const auto& e : record.epochs) {
    CHECK(e.bleu_s2t.has_value());
    CHECK(!e.bleu_t2s.has_value());
  }
}

TEST_CASE("constrained decoding emits only side-appropriate tokens") {
  auto s = TinySetup::make(37);
  auto cfg = fast_config();
  cfg.epoch_size = 60;
  pretrain(s.model, s.vocab, s.cell, cfg);
  auto hyps = translate_corpus(s.model, s.vocab, s.cell.valid_s2t.inputs, &s.cell.tgt_allowed, 20);
  for (const auto& line : hyps) {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      int32_t id = s.vocab.encode(tok);
      CHECK(s.cell.tgt_allowed[size_t(id)] == 1);
    }
  }
}

TEST_CASE("early stopping halts within patience epochs of the best") {
  auto s = TinySetup::make(38);
  auto cfg = fast_config();
  cfg.epoch_size = 2;  // effectively no learning: valid loss plateaus fast
  cfg.max_epochs = 12;
  cfg.patience = 2;
  auto record = pretrain(s.model, s.vocab, s.cell, cfg);
  CHECK(int(record.epochs.size()) <= record.best_epoch + cfg.patience + 1);
  CHECK(int(record.epochs.size()) < 12);
}

TEST_CASE("run records save and load as JSONL") {
  RunRecord r;
  r.stage = "finetune";
  r.best_epoch = 1;
  r.total_steps = 42;
  EpochRecord e0;
  e0.epoch = 0;
  e0.bleu_s2t = 3.5;
  r.epochs.push_back(e0);
  EpochRecord e1;
  e1.epoch = 1;
  e1.bleu_s2t = 7.2;
  e1.bleu_t2s = 6.1;
  r.epochs.push_back(e1);
  auto path = std::filesystem::temp_directory_path() / "unmtlab_record_test.jsonl";
  save_run_record(r, path.string());
  auto r2 = load_run_record(path.string());
  CHECK(r2.stage == "finetune");
  CHECK(r2.total_steps == 42);
  REQUIRE(r2.epochs.size() == 2);
  CHECK(r2.epochs[0].bleu_s2t == doctest::Approx(3.5));
  CHECK(!r2.epochs[0].bleu_t2s.has_value());
  CHECK(r2.epochs[1].bleu_t2s == doctest::Approx(6.1));
  std::filesystem::remove(path);
}

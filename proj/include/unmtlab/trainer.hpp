#pragma once

#include <optional>
#include <string>
#include <vector>

#include <unmtlab/corpus.hpp>
#include <unmtlab/model.hpp>
#include <unmtlab/noise.hpp>
#include <unmtlab/optimizer.hpp>

namespace unmtlab::trainer {

enum class Objective { Mass, Dae };
enum class Variant { Original, Reordered };

std::string objective_name(Objective o);
std::string variant_name(Variant v);
Objective parse_objective(const std::string& s);
Variant parse_variant(const std::string& s);

struct TrainConfig {
  Objective objective = Objective::Dae;
  Variant variant = Variant::Original;
  int epoch_size = 2000;  // optimizer steps per epoch
  int max_epochs = 30;
  int patience = 5;
  BatchingConfig batching{64, 0};
  nn::OptimizerConfig optim;
  noise::NoiseSpec noise;
  int decode_max_len = 40;
  bool constrained_decode = true;  // restrict generation to the other side's vocabulary
  bool eval_every_epoch = true;
  bool mix_pretraining_into_finetune = false;  // ablation hook, off by default
  uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  std::optional<double> bleu_s2t, bleu_t2s;
  double wall_seconds = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_metric = 0.0;
  double wall_seconds = 0.0;
  int64_t total_steps = 0;  // optimizer steps actually taken
  std::string stage;  // "pretrain" | "finetune"
};

void save_run_record(const RunRecord& r, const std::string& path);
RunRecord load_run_record(const std::string& path);

// Inputs and references for one translation direction.
struct DirectionEval {
  std::vector<TokenSeq> inputs;
  std::vector<std::string> references;  // detokenized lines
  std::vector<int> source_lengths;      // word counts, for length-stratified BLEU
};

// Everything one grid cell trains and evaluates on.
struct CellData {
  Corpus src_mono;  // reordered variant supplies the reordered corpus here
  Corpus tgt_mono;
  std::vector<TokenSeq> valid_src, valid_tgt;  // encoded sides for pretraining validation
  DirectionEval valid_s2t, valid_t2s;
  DirectionEval test_s2t, test_t2s;
  std::vector<char> src_allowed, tgt_allowed;  // generation masks (include eos)
};

// Allowed-token mask from side corpora: every id observed on the side plus eos.
std::vector<char> allowed_mask(const Corpus& side_corpus, int32_t vocab_size);

// Decode a batch of inputs; hypotheses come back as detokenized lines.
std::vector<std::string> translate_corpus(const Model& model, const Vocab& vocab,
                                          const std::vector<TokenSeq>& inputs,
                                          const std::vector<char>* allowed, int max_len);

// Self-supervised pre-training over both monolingual corpora, alternating
// batches between languages. Early-stops on validation denoising loss and
// returns with the best parameters restored.
RunRecord pretrain(Model& model, const Vocab& vocab, const CellData& data, const TrainConfig& cfg);

// Iterative back-translation: per direction, synthesize sources by decoding
// the target side through the reverse direction, then take a supervised step
// on (synthetic source -> real target). Validation BLEU is recorded from
// epoch 0 (before any update); early stop is on src->tgt validation BLEU.
RunRecord finetune_backtranslation(Model& model, const Vocab& vocab, const CellData& data,
                                   const TrainConfig& cfg);

}  // namespace unmtlab::trainer

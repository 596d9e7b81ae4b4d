#include <unmtlab/trainer.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <unmtlab/bpe.hpp>
#include <unmtlab/metrics.hpp>

namespace unmtlab::trainer {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string objective_name(Objective o) { return o == Objective::Mass ? "MASS" : "DAE"; }
std::string variant_name(Variant v) { return v == Variant::Original ? "original" : "reordered"; }

Objective parse_objective(const std::string& s) {
  if (s == "MASS" || s == "mass") return Objective::Mass;
  if (s == "DAE" || s == "dae") return Objective::Dae;
  throw PipelineError("trainer", "unknown objective: " + s);
}

Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::Original;
  if (s == "reordered") return Variant::Reordered;
  throw PipelineError("trainer", "unknown data variant: " + s);
}

namespace {
int64_t get_int_or(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? 0 : int64_t(*it);
}
}  // namespace

void save_run_record(const RunRecord& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("trainer", "cannot write " + path);
  for (const auto& e : r.epochs) {
    json j;
    j["stage"] = r.stage;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["valid_loss"] = e.valid_loss;
    j["bleu_s2t"] = e.bleu_s2t ? json(*e.bleu_s2t) : json();
    j["bleu_t2s"] = e.bleu_t2s ? json(*e.bleu_t2s) : json();
    j["wall_seconds"] = e.wall_seconds;
    j["best_epoch"] = r.best_epoch;
    j["total_steps"] = r.total_steps;
    out << j.dump() << '\n';
  }
}

RunRecord load_run_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("trainer", "cannot read " + path);
  RunRecord r;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    EpochRecord e;
    e.epoch = j["epoch"];
    e.train_loss = j["train_loss"];
    e.valid_loss = j["valid_loss"];
    if (!j["bleu_s2t"].is_null()) e.bleu_s2t = double(j["bleu_s2t"]);
    if (!j["bleu_t2s"].is_null()) e.bleu_t2s = double(j["bleu_t2s"]);
    e.wall_seconds = j["wall_seconds"];
    r.stage = j["stage"];
    r.best_epoch = j["best_epoch"];
    r.total_steps = get_int_or(j, "total_steps");
    r.epochs.push_back(e);
  }
  return r;
}

std::vector<char> allowed_mask(const Corpus& side_corpus, int32_t vocab_size) {
  std::vector<char> mask(static_cast<size_t>(vocab_size), 0);
  for (const auto& sent : side_corpus.sentences)
    for (int32_t t : sent) mask[static_cast<size_t>(t)] = 1;
  mask[Vocab::kEos] = 1;
  return mask;
}

std::vector<std::string> translate_corpus(const Model& model, const Vocab& vocab,
                                          const std::vector<TokenSeq>& inputs,
                                          const std::vector<char>* allowed, int max_len) {
  std::vector<std::string> out(inputs.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::g_threads) if (kernels::g_threads > 1)
  for (size_t i = 0; i < inputs.size(); ++i) {
    TokenSeq hyp = model.greedy_decode(inputs[i], max_len, allowed);
    Words sub = vocab.decode(hyp);
    Words words = bpe::detokenize(sub);
    std::string line;
    for (size_t w = 0; w < words.size(); ++w) {
      if (w) line += ' ';
      line += words[w];
    }
    out[i] = line;
  }
  return out;
}

namespace {

// Cycles through a corpus's epoch batches, reshuffling with a fresh data
// epoch when exhausted.
class BatchCursor {
 public:
  BatchCursor(const Corpus& corpus, const BatchingConfig& cfg, uint64_t seed)
      : corpus_(corpus), cfg_(cfg), seed_(seed) {
    refill();
  }

  Batch next() {
    if (pos_ >= batches_.size()) refill();
    return batches_[pos_++];
  }

  const Corpus& corpus() const { return corpus_; }

 private:
  void refill() {
    batches_ = make_epoch_batches(corpus_, cfg_, seed_, data_epoch_++);
    pos_ = 0;
  }
  const Corpus& corpus_;
  BatchingConfig cfg_;
  uint64_t seed_;
  size_t data_epoch_ = 0;
  size_t pos_ = 0;
  std::vector<Batch> batches_;
};

struct TrainBatch {
  EncBatch enc;
  DecBatch dec;
};

TrainBatch make_pretrain_batch(const Corpus& corpus, const Batch& batch, Objective obj,
                               const noise::NoiseSpec& spec, const Vocab& vocab) {
  std::vector<TokenSeq> enc_in;
  enc_in.reserve(batch.indices.size());
  TrainBatch out;
  if (obj == Objective::Mass) {
    std::vector<TokenSeq> fragments;
    std::vector<std::vector<int>> positions;
    for (size_t i = 0; i < batch.indices.size(); ++i) {
      auto ex = noise::mass_mask(corpus.sentences[batch.indices[i]], spec, vocab,
                                 batch.noise_seeds[i]);
      enc_in.push_back(std::move(ex.corrupted_input));
      fragments.push_back(std::move(ex.target_fragment));
      positions.push_back(std::move(ex.decoder_positions));
    }
    out.enc = make_enc_batch(enc_in);
    out.dec = make_dec_batch_fragment(fragments, positions);
  } else {
    std::vector<TokenSeq> targets;
    for (size_t i = 0; i < batch.indices.size(); ++i) {
      auto ex = noise::dae_noise(corpus.sentences[batch.indices[i]], spec, vocab,
                                 batch.noise_seeds[i]);
      enc_in.push_back(std::move(ex.corrupted));
      TokenSeq tgt = std::move(ex.target);
      tgt.push_back(Vocab::kEos);
      targets.push_back(std::move(tgt));
    }
    out.enc = make_enc_batch(enc_in);
    out.dec = make_dec_batch_full(targets);
  }
  return out;
}

double run_train_step(Model& model, nn::Adam<float>& opt, const TrainBatch& tb, double dropout_draw_seed,
                      int64_t global_step) {
  nn::Graph<float> g;
  Rng rng(derive_seed(static_cast<uint64_t>(dropout_draw_seed), "dropout",
                      std::to_string(global_step)));
  auto res = model.forward_loss(g, tb.enc, tb.dec, /*train=*/true, rng);
  if (!std::isfinite(res.value))
    throw PipelineError("trainer",
                        "divergence: non-finite loss at step " + std::to_string(global_step));
  g.backward(res.loss);
  opt.step();
  return res.value;
}

// Token-weighted validation loss under fixed per-sentence noise seeds.
double validation_loss(const Model& model, const Vocab& vocab, const std::vector<TokenSeq>& side,
                       Objective obj, const noise::NoiseSpec& spec, uint64_t seed) {
  double total = 0.0;
  size_t tokens = 0;
  const size_t batch_size = 32;
  for (size_t start = 0; start < side.size(); start += batch_size) {
    size_t end = std::min(side.size(), start + batch_size);
    Batch b;
    for (size_t i = start; i < end; ++i) {
      b.indices.push_back(i);
      b.noise_seeds.push_back(derive_seed(seed, "valid-noise", std::to_string(i)));
    }
    Corpus view;
    view.sentences = side;  // small validation sets; copying is fine
    auto tb = make_pretrain_batch(view, b, obj, spec, vocab);
    nn::Graph<float> g;
    Rng rng(1);
    auto res = model.forward_loss(g, tb.enc, tb.dec, /*train=*/false, rng);
    total += res.value * static_cast<double>(res.n_tokens);
    tokens += res.n_tokens;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

double eval_bleu(const Model& model, const Vocab& vocab, const DirectionEval& dir,
                 const std::vector<char>* allowed, int max_len) {
  auto hyps = translate_corpus(model, vocab, dir.inputs, allowed, max_len);
  return metrics::bleu(hyps, dir.references);
}

}  // namespace

RunRecord pretrain(Model& model, const Vocab& vocab, const CellData& data, const TrainConfig& cfg) {
  RunRecord record;
  record.stage = "pretrain";
  auto t0 = Clock::now();

  BatchCursor src_cur(data.src_mono, cfg.batching, derive_seed(cfg.seed, "pretrain-src"));
  BatchCursor tgt_cur(data.tgt_mono, cfg.batching, derive_seed(cfg.seed, "pretrain-tgt"));
  nn::Adam<float> opt(model.trainable_params(), cfg.optim);

  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<TensorF> best_params;
  int64_t global_step = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto e0 = Clock::now();
    double loss_sum = 0.0;
    for (int step = 0; step < cfg.epoch_size; ++step, ++global_step) {
      BatchCursor& cur = (step % 2 == 0) ? src_cur : tgt_cur;
      auto tb = make_pretrain_batch(cur.corpus(), cur.next(), cfg.objective, cfg.noise, vocab);
      loss_sum += run_train_step(model, opt, tb, static_cast<double>(cfg.seed), global_step);
    }
    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = loss_sum / cfg.epoch_size;
    double vs = validation_loss(model, vocab, data.valid_src, cfg.objective, cfg.noise, cfg.seed);
    double vt = validation_loss(model, vocab, data.valid_tgt, cfg.objective, cfg.noise, cfg.seed);
    er.valid_loss = 0.5 * (vs + vt);
    er.wall_seconds = std::chrono::duration<double>(Clock::now() - e0).count();
    record.epochs.push_back(er);

    if (er.valid_loss < best_loss) {
      best_loss = er.valid_loss;
      best_params = model.snapshot_params();
      record.best_epoch = epoch;
      record.best_metric = best_loss;
    } else if (epoch - record.best_epoch >= cfg.patience) {
      break;
    }
  }
  if (!best_params.empty()) model.restore_params(best_params);
  record.total_steps = opt.steps_taken();
  record.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return record;
}

RunRecord finetune_backtranslation(Model& model, const Vocab& vocab, const CellData& data,
                                   const TrainConfig& cfg) {
  RunRecord record;
  record.stage = "finetune";
  auto t0 = Clock::now();
  const bool reordered = cfg.variant == Variant::Reordered;
  const std::vector<char>* src_allowed = cfg.constrained_decode ? &data.src_allowed : nullptr;
  const std::vector<char>* tgt_allowed = cfg.constrained_decode ? &data.tgt_allowed : nullptr;

  auto eval_epoch = [&](int epoch, double train_loss, double secs) {
    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = train_loss;
    er.wall_seconds = secs;
    if (cfg.eval_every_epoch) {
      er.bleu_s2t = eval_bleu(model, vocab, data.valid_s2t, tgt_allowed, cfg.decode_max_len);
      if (!reordered)
        er.bleu_t2s = eval_bleu(model, vocab, data.valid_t2s, src_allowed, cfg.decode_max_len);
    }
    record.epochs.push_back(er);
    return er;
  };

  // epoch 0: scores of the pre-trained model before any fine-tuning step
  {
    auto e0 = Clock::now();
    auto er = eval_epoch(0, 0.0, 0.0);
    record.epochs.back().wall_seconds = std::chrono::duration<double>(Clock::now() - e0).count();
    record.best_epoch = 0;
    record.best_metric = er.bleu_s2t.value_or(0.0);
  }
  std::vector<TensorF> best_params = model.snapshot_params();

  BatchCursor tgt_cur(data.tgt_mono, cfg.batching, derive_seed(cfg.seed, "bt-tgt"));
  BatchCursor src_cur(data.src_mono, cfg.batching, derive_seed(cfg.seed, "bt-src"));
  BatchCursor pre_src(data.src_mono, cfg.batching, derive_seed(cfg.seed, "bt-mix-src"));
  BatchCursor pre_tgt(data.tgt_mono, cfg.batching, derive_seed(cfg.seed, "bt-mix-tgt"));
  nn::Adam<float> opt(model.trainable_params(), cfg.optim);
  int64_t global_step = 0;
  int skipped_steps = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto e0 = Clock::now();
    double loss_sum = 0.0;
    int counted = 0;
    for (int step = 0; step < cfg.epoch_size; ++step, ++global_step) {
      const bool to_tgt = step % 2 == 0;  // direction src->tgt trains on (synth src, real tgt)
      BatchCursor& cur = to_tgt ? tgt_cur : src_cur;
      Batch batch = cur.next();

      std::vector<TokenSeq> real, synth;
      real.reserve(batch.indices.size());
      for (size_t idx : batch.indices) real.push_back(cur.corpus().sentences[idx]);
      const std::vector<char>* reverse_allowed = to_tgt ? src_allowed : tgt_allowed;
      synth.resize(real.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::g_threads) if (kernels::g_threads > 1)
      for (size_t i = 0; i < real.size(); ++i)
        synth[i] = model.greedy_decode(real[i], cfg.decode_max_len, reverse_allowed);

      std::vector<TokenSeq> enc_in, targets;
      for (size_t i = 0; i < real.size(); ++i) {
        if (synth[i].empty()) continue;  // all-eos decode contributes nothing
        enc_in.push_back(synth[i]);
        TokenSeq t = real[i];
        t.push_back(Vocab::kEos);
        targets.push_back(std::move(t));
      }
      if (enc_in.empty()) {
        ++skipped_steps;
        if (skipped_steps <= 3)
          std::fprintf(stderr, "[trainer] warning: empty synthetic batch, skipping step %lld\n",
                       static_cast<long long>(global_step));
        continue;
      }
      TrainBatch tb{make_enc_batch(enc_in), make_dec_batch_full(targets)};
      loss_sum += run_train_step(model, opt, tb, static_cast<double>(cfg.seed) + 1, global_step);
      ++counted;

      if (cfg.mix_pretraining_into_finetune && step % 4 == 3) {
        BatchCursor& mix = to_tgt ? pre_src : pre_tgt;
        auto mb = make_pretrain_batch(mix.corpus(), mix.next(), cfg.objective, cfg.noise, vocab);
        run_train_step(model, opt, mb, static_cast<double>(cfg.seed) + 2, global_step);
      }
    }
    double secs = std::chrono::duration<double>(Clock::now() - e0).count();
    auto er = eval_epoch(epoch, counted ? loss_sum / counted : 0.0, secs);

    double metric = er.bleu_s2t.value_or(0.0);
    if (metric > record.best_metric) {
      record.best_metric = metric;
      record.best_epoch = epoch;
      best_params = model.snapshot_params();
    } else if (epoch - record.best_epoch >= cfg.patience) {
      break;
    }
  }
  model.restore_params(best_params);
  record.total_steps = opt.steps_taken();
  record.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return record;
}

}  // namespace unmtlab::trainer

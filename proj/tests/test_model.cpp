#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <unmtlab/model.hpp>
#include <unmtlab/optimizer.hpp>

using namespace unmtlab;

namespace {

template <typename T>
Tensor<T> random_embeddings(size_t vocab, size_t d, uint64_t seed) {
  Rng rng(seed);
  Tensor<T> e(vocab, d);
  for (auto& v : e.data) v = static_cast<T>(rng.normal() * 0.3);
  return e;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.enc_layers = 2;
  cfg.dec_layers = 2;
  cfg.heads = 2;
  cfg.d_model = 16;
  cfg.d_ffn = 32;
  cfg.max_positions = 16;
  cfg.dropout = 0.0;
  return cfg;
}

template <typename T>
double loss_of(const TransformerT<T>& m, const EncBatch& eb, const DecBatch& db) {
  nn::Graph<T> g;
  Rng rng(1);
  auto res = m.forward_loss(g, eb, db, /*train=*/false, rng);
  return res.value;
}

}  // namespace

TEST_CASE("build_model: determinism, embedding copy, head divisibility") {
  auto emb = random_embeddings<float>(30, 64, 5);
  ModelConfig cfg;
  cfg.dropout = 0.0;
  auto m1 = Model::build(cfg, emb, 123, 9);
  auto m2 = Model::build(cfg, emb, 123, 9);
  auto p1 = m1.trainable_params();
  auto p2 = m2.trainable_params();
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value.data == p2[i]->value.data);

  CHECK(m1.tok_emb.data == emb.data);

  ModelConfig bad;
  bad.d_model = 64;
  bad.heads = 5;
  CHECK_THROWS_AS(Model::build(bad, emb, 1, 1), PipelineError);
}

TEST_CASE("input_representation is the sum of token and position embeddings") {
  auto emb = random_embeddings<float>(30, 64, 6);
  ModelConfig cfg;
  auto m = Model::build(cfg, emb, 1, 2);

  SUBCASE("zero position table reduces to token embeddings") {
    m.enc_pos.value.zero();
    TokenSeq toks = {5, 9, 5};
    auto rep = m.input_representation(toks);
    for (int j = 0; j < 64; ++j) {
      CHECK(rep.at(0, size_t(j)) == emb.at(5, size_t(j)));
      CHECK(rep.at(1, size_t(j)) == emb.at(9, size_t(j)));
    }
  }

  SUBCASE("same token at two positions differs exactly by the position rows") {
    TokenSeq toks = {7, 8, 9, 10, 11, 7};
    auto rep = m.input_representation(toks);
    for (int j = 0; j < 64; ++j) {
      float diff = rep.at(0, size_t(j)) - rep.at(5, size_t(j));
      float expect = m.enc_pos.value.at(0, size_t(j)) - m.enc_pos.value.at(5, size_t(j));
      CHECK(diff == doctest::Approx(expect).epsilon(1e-6));
    }
  }

  SUBCASE("overlong sequence errors") {
    TokenSeq toks(size_t(cfg.max_positions) + 1, 5);
    CHECK_THROWS_AS(m.input_representation(toks), PipelineError);
  }
}

TEST_CASE("uniform logits give loss ln|V| within 1e-6") {
  const size_t V = 37, d = 16;
  Tensor<float> emb(V, d);  // all-zero embeddings + zero bias -> uniform logits
  nn::Graph<float> g;
  auto x = g.input(Tensor<float>(4, d));
  nn::Param<float> bias;
  bias.name = "b";
  bias.value.resize(1, V);
  std::vector<int32_t> targets = {1, 5, 9, 30};
  std::vector<uint8_t> mask = {1, 1, 1, 1};
  auto res = g.tied_softmax_ce(x, emb, bias, targets, mask);
  CHECK(std::abs(res.value - std::log(double(V))) <= 1e-6);
}

TEST_CASE("all-pad target is an error") {
  const size_t V = 10, d = 8;
  Tensor<float> emb(V, d);
  nn::Graph<float> g;
  auto x = g.input(Tensor<float>(2, d));
  nn::Param<float> bias;
  bias.value.resize(1, V);
  std::vector<int32_t> targets = {0, 0};
  std::vector<uint8_t> mask = {0, 0};
  CHECK_THROWS_AS(g.tied_softmax_ce(x, emb, bias, targets, mask), PipelineError);
}

TEST_CASE("padding and batch order leave the loss unchanged") {
  auto emb = random_embeddings<float>(40, 16, 7);
  auto cfg = tiny_config();
  auto m = TransformerT<float>::build(cfg, emb, 1, 3);

  std::vector<TokenSeq> src = {{6, 7, 8, 9}, {10, 11, 12, 13, 14, 15}};
  std::vector<TokenSeq> tgt = {{16, 17, 2}, {18, 19, 20, 21, 2}};

  double base = loss_of(m, make_enc_batch(src), make_dec_batch_full(tgt));

  SUBCASE("extra pad columns") {
    auto eb = make_enc_batch(src);
    auto db = make_dec_batch_full(tgt);
    // widen both batches by two pad columns
    auto widen_enc = [](EncBatch b) {
      EncBatch w = b;
      w.len = b.len + 2;
      w.tokens.assign(size_t(w.batch * w.len), Vocab::kPad);
      w.positions.assign(size_t(w.batch * w.len), 0);
      for (int i = 0; i < b.batch; ++i)
        for (int j = 0; j < b.len; ++j) {
          w.tokens[size_t(i * w.len + j)] = b.tokens[size_t(i * b.len + j)];
          w.positions[size_t(i * w.len + j)] = b.positions[size_t(i * b.len + j)];
        }
      return w;
    };
    auto widen_dec = [](DecBatch b) {
      DecBatch w = b;
      w.len = b.len + 2;
      w.in_tokens.assign(size_t(w.batch * w.len), Vocab::kPad);
      w.positions.assign(size_t(w.batch * w.len), 0);
      w.targets.assign(size_t(w.batch * w.len), Vocab::kPad);
      w.target_mask.assign(size_t(w.batch * w.len), 0);
      for (int i = 0; i < b.batch; ++i)
        for (int j = 0; j < b.len; ++j) {
          w.in_tokens[size_t(i * w.len + j)] = b.in_tokens[size_t(i * b.len + j)];
          w.positions[size_t(i * w.len + j)] = b.positions[size_t(i * b.len + j)];
          w.targets[size_t(i * w.len + j)] = b.targets[size_t(i * b.len + j)];
          w.target_mask[size_t(i * w.len + j)] = b.target_mask[size_t(i * b.len + j)];
        }
      return w;
    };
    double padded = loss_of(m, widen_enc(eb), widen_dec(db));
    CHECK(std::abs(padded - base) <= 1e-6);
  }

  SUBCASE("permuting sentences within the batch") {
    std::vector<TokenSeq> src2 = {src[1], src[0]};
    std::vector<TokenSeq> tgt2 = {tgt[1], tgt[0]};
    double permuted = loss_of(m, make_enc_batch(src2), make_dec_batch_full(tgt2));
    CHECK(std::abs(permuted - base) <= 1e-6);
  }
}

TEST_CASE("fp64 finite-difference gradient check, max rel err <= 1e-3") {
  auto emb = random_embeddings<double>(25, 16, 11);
  auto cfg = tiny_config();
  auto m = TransformerT<double>::build(cfg, emb, 1, 13);

  std::vector<TokenSeq> src = {{5, 6, 7, 8, 9}, {10, 11, 12}};
  std::vector<TokenSeq> tgt = {{13, 14, 15, 2}, {16, 17, 2}};
  auto eb = make_enc_batch(src);
  auto db = make_dec_batch_full(tgt);

  // analytic gradients
  nn::Graph<double> g;
  Rng rng(1);
  auto res = m.forward_loss(g, eb, db, false, rng);
  g.backward(res.loss);

  auto params = m.trainable_params();
  Rng pick(77);
  double max_rel = 0.0;
  int checked = 0;
  while (checked < 20) {
    auto* p = params[pick.uniform_index(params.size())];
    if (p->value.size() == 0) continue;
    size_t j = pick.uniform_index(p->value.size());
    double analytic = p->grad.size() == p->value.size() ? p->grad.data[j] : 0.0;

    const double h = 1e-5;
    double saved = p->value.data[j];
    p->value.data[j] = saved + h;
    double lp = loss_of(m, eb, db);
    p->value.data[j] = saved - h;
    double lm = loss_of(m, eb, db);
    p->value.data[j] = saved;
    double numeric = (lp - lm) / (2 * h);

    if (std::abs(numeric) < 1e-9 && std::abs(analytic) < 1e-9) {
      ++checked;
      continue;
    }
    double rel = std::abs(numeric - analytic) / std::max(1e-8, std::abs(numeric) + std::abs(analytic));
    INFO("param ", p->name, " idx ", j, " numeric ", numeric, " analytic ", analytic);
    CHECK(rel <= 1e-3);
    max_rel = std::max(max_rel, rel);
    ++checked;
  }
  MESSAGE("max relative error over 20 checks: ", max_rel);
}

TEST_CASE("frozen embeddings survive 100 optimizer steps; other params move") {
  auto emb = random_embeddings<float>(30, 16, 21);
  auto cfg = tiny_config();
  auto m = TransformerT<float>::build(cfg, emb, 1, 5);
  uint64_t before = m.embedding_checksum();
  float bias_before = m.out_bias.value.at(0, 7);

  nn::Adam<float> opt(m.trainable_params(), {});
  Rng rng(3);
  std::vector<TokenSeq> src = {{6, 7, 8, 9}, {10, 11, 12, 13}};
  std::vector<TokenSeq> tgt = {{14, 15, 2}, {16, 17, 18, 2}};
  auto eb = make_enc_batch(src);
  auto db = make_dec_batch_full(tgt);
  for (int step = 0; step < 100; ++step) {
    nn::Graph<float> g;
    auto res = m.forward_loss(g, eb, db, true, rng);
    g.backward(res.loss);
    opt.step();
  }
  CHECK(m.embedding_checksum() == before);
  CHECK(m.out_bias.value.at(0, 7) != bias_before);
}

TEST_CASE("training actually reduces the loss on a fixed batch") {
  auto emb = random_embeddings<float>(30, 16, 22);
  auto cfg = tiny_config();
  auto m = TransformerT<float>::build(cfg, emb, 1, 6);
  nn::Adam<float> opt(m.trainable_params(), {});
  Rng rng(4);
  std::vector<TokenSeq> src = {{6, 7, 8, 9}, {10, 11, 12, 13}};
  std::vector<TokenSeq> tgt = {{14, 15, 2}, {16, 17, 18, 2}};
  auto eb = make_enc_batch(src);
  auto db = make_dec_batch_full(tgt);
  double first = loss_of(m, eb, db);
  for (int step = 0; step < 150; ++step) {
    nn::Graph<float> g;
    auto res = m.forward_loss(g, eb, db, false, rng);
    g.backward(res.loss);
    opt.step();
  }
  double last = loss_of(m, eb, db);
  CHECK(last < first * 0.5);
}

TEST_CASE("greedy_decode: determinism, eos rigging, vocab restriction") {
  auto emb = random_embeddings<float>(30, 16, 23);
  auto cfg = tiny_config();
  auto m = TransformerT<float>::build(cfg, emb, 1, 7);

  TokenSeq src = {6, 7, 8};
  auto a = m.greedy_decode(src, 10);
  auto b = m.greedy_decode(src, 10);
  CHECK(a == b);

  SUBCASE("output layer rigged to always argmax eos gives an empty translation") {
    m.out_bias.value.at(0, Vocab::kEos) = 1e6f;
    CHECK(m.greedy_decode(src, 10).empty());
  }

  SUBCASE("allowed mask restricts emissions") {
    std::vector<char> allowed(30, 0);
    allowed[20] = 1;
    allowed[Vocab::kEos] = 1;
    m.out_bias.value.at(0, 25) = 1e6f;  // huge but disallowed
    auto out = m.greedy_decode(src, 6, &allowed);
    for (int32_t t : out) CHECK(t == 20);
  }
}

TEST_CASE("incremental decode agrees with the training-path forward") {
  auto emb = random_embeddings<float>(30, 16, 24);
  auto cfg = tiny_config();
  auto m = TransformerT<float>::build(cfg, emb, 1, 8);

  TokenSeq src = {6, 7, 8, 9};
  auto decoded = m.greedy_decode(src, 8);
  if (decoded.empty()) return;  // untrained model may immediately emit eos

  // teacher-force the decoded prefix through the training path and check the
  // argmax chain reproduces the decode
  nn::Graph<float> g;
  Rng rng(1);
  auto eb = make_enc_batch({src});
  TokenSeq tf = decoded;
  tf.push_back(Vocab::kEos);  // row for the final step
  auto db = make_dec_batch_full({tf});
  auto enc_out = m.encode(g, eb, false, rng);
  auto dec_out = m.decode(g, enc_out, eb, db, false, rng);
  const auto& h = g.val(dec_out);

  for (size_t step = 0; step < decoded.size(); ++step) {
    float best_score = -1e30f;
    int32_t best = -1;
    for (size_t v = 0; v < 30; ++v) {
      if (int32_t(v) == Vocab::kPad || int32_t(v) == Vocab::kBos) continue;
      float s = float(kernels::dot_span(m.tok_emb.row(v), h.row(step), 16)) +
                m.out_bias.value.at(0, v);
      if (s > best_score) {
        best_score = s;
        best = int32_t(v);
      }
    }
    CHECK(best == decoded[step]);
  }
}

TEST_CASE("checkpoint save/load round-trips parameters and behavior") {
  auto emb = random_embeddings<float>(30, 16, 25);
  auto cfg = tiny_config();
  auto m = TransformerT<float>::build(cfg, emb, 42, 9);
  auto path = std::filesystem::temp_directory_path() / "unmtlab_ckpt_test.bin";
  m.save(path.string());
  auto m2 = TransformerT<float>::load(path.string());
  CHECK(m2.vocab_fingerprint == 42);
  CHECK(m2.embedding_checksum() == m.embedding_checksum());
  TokenSeq src = {6, 7, 8, 9, 10};
  CHECK(m2.greedy_decode(src, 10) == m.greedy_decode(src, 10));
  std::vector<TokenSeq> tgt = {{14, 15, 2}};
  double l1 = loss_of(m, make_enc_batch({src}), make_dec_batch_full(tgt));
  double l2 = loss_of(m2, make_enc_batch({src}), make_dec_batch_full(tgt));
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-7));
  std::filesystem::remove(path);
}

TEST_CASE("fragment decoder batches carry absolute positions") {
  auto b = make_dec_batch_fragment({{10, 11, 12}}, {{4, 5, 6}});
  CHECK(b.positions == std::vector<int32_t>{4, 5, 6});
  CHECK(b.in_tokens == std::vector<int32_t>{Vocab::kBos, 10, 11});
  CHECK(b.targets == std::vector<int32_t>{10, 11, 12});
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include <unmtlab/noise.hpp>

using namespace unmtlab;
using namespace unmtlab::noise;

namespace {

Vocab test_vocab(int n_tokens) {
  std::vector<Words> corpus(1);
  for (int i = 0; i < n_tokens; ++i) corpus[0].push_back("tok" + std::to_string(i));
  return build_vocab({corpus}, 1);
}

std::multiset<int32_t> bag(const TokenSeq& t) { return {t.begin(), t.end()}; }

}  // namespace

TEST_CASE("mass_mask: fragment size, contiguity, untouched outside") {
  Vocab v = test_vocab(100);
  NoiseSpec spec;

  TokenSeq sent;
  for (int i = 0; i < 10; ++i) sent.push_back(Vocab::kNumSpecials + i);

  for (uint64_t seed = 0; seed < 50; ++seed) {
    auto ex = mass_mask(sent, spec, v, seed);
    CHECK(ex.target_fragment.size() == 5);  // k = round(0.5 * 10)
    CHECK(ex.corrupted_input.size() == sent.size());
    // target fragment equals the original tokens at the fragment positions
    for (size_t j = 0; j < 5; ++j)
      CHECK(ex.target_fragment[j] == sent[size_t(ex.fragment_start) + j]);
    // corrupted positions form exactly one interval of length k
    for (size_t i = 0; i < sent.size(); ++i) {
      bool inside = int(i) >= ex.fragment_start && int(i) < ex.fragment_start + 5;
      if (!inside) CHECK(ex.corrupted_input[i] == sent[i]);
    }
    for (size_t j = 0; j < 5; ++j)
      CHECK(ex.decoder_positions[j] == ex.fragment_start + int(j));
  }
}

TEST_CASE("mass_mask: length-1 boundary and empty input error") {
  Vocab v = test_vocab(10);
  NoiseSpec spec;
  TokenSeq one = {Vocab::kNumSpecials};
  auto ex = mass_mask(one, spec, v, 3);
  CHECK(ex.target_fragment == one);
  CHECK(ex.fragment_start == 0);
  CHECK_THROWS_AS(mass_mask({}, spec, v, 3), PipelineError);
}

TEST_CASE("mass_mask multinomial matches (0.8, 0.1, 0.1) over 1e5 fragment tokens") {
  Vocab v = test_vocab(200);
  NoiseSpec spec;
  TokenSeq sent;
  for (int i = 0; i < 20; ++i) sent.push_back(Vocab::kNumSpecials + i);

  int64_t masked = 0, kept = 0, randomized = 0, total = 0;
  uint64_t seed = 0;
  while (total < 100000) {
    auto ex = mass_mask(sent, spec, v, seed++);
    for (size_t j = 0; j < ex.target_fragment.size(); ++j) {
      int32_t out = ex.corrupted_input[size_t(ex.fragment_start) + j];
      if (out == Vocab::kMask) ++masked;
      else if (out == ex.target_fragment[j]) ++kept;
      else ++randomized;
      ++total;
    }
  }
  double m = double(masked) / double(total);
  double r = double(randomized) / double(total);
  double k = double(kept) / double(total);
  CHECK(m >= 0.79); CHECK(m <= 0.81);
  CHECK(r >= 0.09); CHECK(r <= 0.11);
  CHECK(k >= 0.09); CHECK(k <= 0.11);
}

TEST_CASE("mass_mask random replacements never produce specials") {
  Vocab v = test_vocab(50);
  NoiseSpec spec;
  spec.mass_mask_p = 0.0;
  spec.mass_rand_p = 1.0;
  spec.mass_keep_p = 0.0;
  TokenSeq sent(12, Vocab::kNumSpecials + 1);
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto ex = mass_mask(sent, spec, v, seed);
    for (int32_t t : ex.corrupted_input) CHECK(t >= Vocab::kNumSpecials);
  }
}

TEST_CASE("dae_shuffle: k=0 identity, len-1 identity") {
  TokenSeq sent = {7, 8, 9, 10};
  CHECK(dae_shuffle(sent, 0, 1) == sent);
  TokenSeq one = {5};
  CHECK(dae_shuffle(one, 3, 1) == one);
}

TEST_CASE("dae_shuffle: displacement audit over 10k trials") {
  TokenSeq sent;
  for (int i = 0; i < 20; ++i) sent.push_back(100 + i);  // distinct values track positions
  int max_disp = 0;
  bool moved = false;
  for (uint64_t seed = 0; seed < 10000; ++seed) {
    auto out = dae_shuffle(sent, 3, seed);
    REQUIRE(bag(out) == bag(sent));
    for (size_t j = 0; j < out.size(); ++j) {
      int orig = out[j] - 100;
      max_disp = std::max(max_disp, std::abs(int(j) - orig));
      if (int(j) != orig) moved = true;
    }
  }
  CHECK(max_disp <= 3);
  CHECK(moved);  // the noise actually does something
}

TEST_CASE("dae_dropout_blank: identity at zero, never empty, rates concentrate") {
  TokenSeq sent = {10, 11, 12, 13};
  CHECK(dae_dropout_blank(sent, 0.0, 0.0, Vocab::kMask, 5) == sent);

  TokenSeq one = {42};
  for (uint64_t seed = 0; seed < 300; ++seed) {
    auto out = dae_dropout_blank(one, 0.99, 0.0, Vocab::kMask, seed);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 42);
  }

  // Monte Carlo over 1e5 tokens
  TokenSeq big(100000, 9);
  auto dropped = dae_dropout_blank(big, 0.1, 0.0, Vocab::kMask, 17);
  double drop_rate = 1.0 - double(dropped.size()) / 100000.0;
  CHECK(drop_rate >= 0.09);
  CHECK(drop_rate <= 0.11);

  auto blanked = dae_dropout_blank(big, 0.0, 0.1, Vocab::kMask, 18);
  REQUIRE(blanked.size() == big.size());
  int64_t blanks = 0;
  for (int32_t t : blanked)
    if (t == Vocab::kMask) ++blanks;
  double blank_rate = double(blanks) / 100000.0;
  CHECK(blank_rate >= 0.09);
  CHECK(blank_rate <= 0.11);
}

TEST_CASE("dae_noise: all-zero spec is identity; target is always the original") {
  Vocab v = test_vocab(30);
  NoiseSpec zero;
  zero.shuffle_k = 0;
  zero.word_dropout = 0.0;
  zero.word_blank = 0.0;
  TokenSeq sent = {6, 7, 8, 9};
  auto ex = dae_noise(sent, zero, v, 3);
  CHECK(ex.corrupted == sent);
  CHECK(ex.target == sent);

  NoiseSpec spec;
  for (uint64_t seed = 0; seed < 100; ++seed) CHECK(dae_noise(sent, spec, v, seed).target == sent);
}

TEST_CASE("dae_noise expected corrupted length is 0.9 of input") {
  Vocab v = test_vocab(30);
  NoiseSpec spec;  // dropout 0.1
  TokenSeq sent(10, 8);
  int64_t total = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) total += int64_t(dae_noise(sent, spec, v, uint64_t(i)).corrupted.size());
  double mean_len = double(total) / n;
  CHECK(mean_len >= 0.9 * 10 - 0.15);
  CHECK(mean_len <= 0.9 * 10 + 0.15);
}

TEST_CASE("noise operations are pure functions of input and seed") {
  Vocab v = test_vocab(40);
  NoiseSpec spec;
  TokenSeq sent = {5, 6, 7, 8, 9, 10, 11, 12};
  auto a = mass_mask(sent, spec, v, 77);
  auto b = mass_mask(sent, spec, v, 77);
  CHECK(a.corrupted_input == b.corrupted_input);
  CHECK(a.fragment_start == b.fragment_start);
  CHECK(dae_noise(sent, spec, v, 78).corrupted == dae_noise(sent, spec, v, 78).corrupted);
}

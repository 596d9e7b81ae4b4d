#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <unmtlab/analysis.hpp>
#include <filesystem>

#include <unmtlab/metrics.hpp>

using namespace unmtlab;
using namespace unmtlab::metrics;

TEST_CASE("BLEU: identity corpus scores 100") {
  std::vector<std::string> text = {"the cat sat", "a dog", "hello"};
  CHECK(bleu(text, text) == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("BLEU: clipping drives repeated-token hypothesis to zero") {
  // p1 = 1/4 clipped, p2..p4 = 0 -> score 0 (no smoothing)
  std::vector<std::string> hyp = {"the the the the"};
  std::vector<std::string> ref = {"the cat sat down"};
  CHECK(bleu(hyp, ref) == 0.0);
}

TEST_CASE("BLEU golden: hand-computed three-sentence corpus") {
  // hand n-gram counts:
  //   p1 = 12/14, p2 = 9/11, p3 = 6/8, p4 = 4/5, hyp_len = ref_len = 14 -> BP 1
  //   100 * (12/14 * 9/11 * 6/8 * 4/5)^(1/4) = 80.540361
  std::vector<std::string> hyp = {"the cat sat on the mat", "a dog barks",
                                  "green ideas sleep furiously here"};
  std::vector<std::string> ref = {"the cat sat on the mat", "a dog barked",
                                  "colorless green ideas sleep furiously"};
  CHECK(bleu(hyp, ref) == doctest::Approx(80.540361).epsilon(1e-4));
}

TEST_CASE("BLEU: brevity penalty and errors") {
  // one-word hypothesis against a longer reference: only the 1-gram order
  // exists in the hypothesis, p1 = 1, BP = exp(1 - 3/1)
  std::vector<std::string> hyp = {"the"};
  std::vector<std::string> ref = {"the cat sat"};
  CHECK(bleu(hyp, ref) == doctest::Approx(100.0 * std::exp(-2.0)).epsilon(1e-6));

  CHECK_THROWS_AS(bleu({"a"}, {"a", "b"}), PipelineError);
  CHECK_THROWS_AS(bleu({}, {}), PipelineError);
}

TEST_CASE("BLEU is invariant to sentence order") {
  std::vector<std::string> hyp = {"aa bb cc dd", "ee ff gg hh", "ii jj kk ll"};
  std::vector<std::string> ref = {"aa bb cc xx", "ee ff gg hh", "ii jj yy ll"};
  double fwd = bleu(hyp, ref);
  std::vector<std::string> hyp2 = {hyp[2], hyp[0], hyp[1]};
  std::vector<std::string> ref2 = {ref[2], ref[0], ref[1]};
  CHECK(bleu(hyp2, ref2) == doctest::Approx(fwd).epsilon(1e-12));
}

TEST_CASE("chrF: identity is 100, disjoint is 0") {
  std::vector<std::string> text = {"abcdef", "ghijkl"};
  CHECK(chrf(text, text) == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(chrf({"abcd"}, {"wxyz"}) == 0.0);
  CHECK(chrf({"abc"}, {"abc"}) == doctest::Approx(100.0).epsilon(1e-9));  // short: orders 4-6 skipped
}

TEST_CASE("chrF goldens: hand-computed character n-gram counts") {
  // "abc" vs "abd": P = R = (2/3 + 1/2 + 0)/3 = 7/18 -> F2 = 38.888889
  CHECK(chrf({"abc"}, {"abd"}) == doctest::Approx(38.888889).epsilon(1e-4));
  // two sentences with spaces counted as characters:
  //   per-order corpus P=R: 10/12, 7/10, 4/8, 2/6, 0/4, 0/2 -> mean 0.394444
  CHECK(chrf({"ab cd", "the cat"}, {"ab ce", "the bat"}) ==
        doctest::Approx(39.444444).epsilon(1e-4));
}

TEST_CASE("bleu_by_length: degenerate bin equals corpus bleu; bins partition") {
  std::vector<std::string> hyp = {"aa bb cc dd", "ee ff gg hh", "ii jj kk ll"};
  std::vector<std::string> ref = {"aa bb cc xx", "ee ff gg hh", "ii jj yy ll"};
  std::vector<int> lens = {4, 8, 12};

  auto single = bleu_by_length(hyp, ref, lens, {1, 100});
  REQUIRE(single.size() == 1);
  CHECK(single[0].bleu == doctest::Approx(bleu(hyp, ref)).epsilon(1e-12));
  CHECK(single[0].count == 3);
  CHECK(single[0].low_confidence);  // < 5 sentences

  auto bins = bleu_by_length(hyp, ref, lens, {1, 5, 9, 100});
  size_t total = 0;
  for (const auto& b : bins) total += b.count;
  CHECK(total == 3);

  CHECK_THROWS_AS(bleu_by_length(hyp, ref, lens, {1, 5}), PipelineError);  // length 8 uncovered
}

TEST_CASE("bleu_by_length: rigged perfect-short / empty-long hypotheses") {
  std::vector<std::string> hyp, ref;
  std::vector<int> lens;
  for (int i = 0; i < 6; ++i) {
    hyp.push_back("aa bb cc dd");
    ref.push_back("aa bb cc dd");
    lens.push_back(4);
  }
  for (int i = 0; i < 6; ++i) {
    hyp.push_back("zz");
    ref.push_back("pp qq rr ss tt uu vv ww xx yy pp qq");
    lens.push_back(12);
  }
  auto bins = bleu_by_length(hyp, ref, lens, {1, 11, 31});
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].bleu == doctest::Approx(100.0));
  CHECK(bins[1].bleu == 0.0);
}

TEST_CASE("position_similarity: degenerate tables") {
  SUBCASE("identical rows give all-ones and width P-1") {
    TensorF pos(6, 8);
    for (size_t i = 0; i < pos.rows; ++i)
      for (size_t j = 0; j < pos.cols; ++j) pos.at(i, j) = float(j) + 1.0f;
    auto sim = analysis::position_similarity(pos, 6, 0.5);
    CHECK(sim.neighborhood_width == doctest::Approx(5.0));
    for (size_t i = 0; i < 6; ++i) {
      CHECK(sim.matrix.at(i, i) == doctest::Approx(1.0).epsilon(1e-6));
      for (size_t j = 0; j < 6; ++j) CHECK(sim.matrix.at(i, j) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  SUBCASE("orthogonal rows give near-zero width") {
    TensorF pos(6, 8);
    for (size_t i = 0; i < 6; ++i) pos.at(i, i) = 1.0f;
    auto sim = analysis::position_similarity(pos, 6, 0.5);
    CHECK(sim.neighborhood_width == doctest::Approx(0.0));
    for (size_t i = 0; i < 6; ++i)
      for (size_t j = 0; j < 6; ++j)
        if (i != j) CHECK(sim.matrix.at(i, j) == doctest::Approx(0.0));
  }

  SUBCASE("zero-norm row flags a warning and similarities are zero") {
    TensorF pos(4, 8);
    for (size_t i = 0; i < 3; ++i) pos.at(i, 0) = 1.0f;  // row 3 all zeros
    auto sim = analysis::position_similarity(pos, 4, 0.5);
    CHECK(sim.zero_norm_warning);
    for (size_t j = 0; j < 4; ++j) CHECK(sim.matrix.at(3, j) == 0.0f);
  }

  SUBCASE("matrix is symmetric with unit diagonal") {
    Rng rng(5);
    TensorF pos(10, 16);
    for (auto& v : pos.data) v = float(rng.normal());
    auto sim = analysis::position_similarity(pos, 10, 0.5);
    for (size_t i = 0; i < 10; ++i) {
      CHECK(sim.matrix.at(i, i) == doctest::Approx(1.0).epsilon(1e-6));
      for (size_t j = 0; j < 10; ++j)
        CHECK(sim.matrix.at(i, j) == doctest::Approx(sim.matrix.at(j, i)).epsilon(1e-6));
    }
  }
}

TEST_CASE("comparison table renders deltas, dashes, and ties") {
  using analysis::CellResult;
  std::vector<CellResult> cells = {
      {"MASS", "original", 14.16, 14.03, 39.45, 46.07},
      {"MASS", "reordered", 14.63, std::nullopt, 41.77, std::nullopt},
      {"DAE", "original", 21.03, 21.89, 45.63, 52.21},
      {"DAE", "reordered", 15.22, std::nullopt, 42.18, std::nullopt},
  };
  std::string table = analysis::render_comparison_table(cells);
  CHECK(table.find("14.63 (↑ 0.47)") != std::string::npos);
  CHECK(table.find("15.22 (↓ 5.81)") != std::string::npos);
  // reordered rows never show a tgt->src score
  auto line_of = [&](const std::string& needle) {
    size_t p = table.find(needle);
    REQUIRE(p != std::string::npos);
    size_t e = table.find('\n', p);
    return table.substr(p, e - p);
  };
  CHECK(line_of("MASS-static + R").find("14.03") == std::string::npos);
  CHECK(line_of("MASS-static + R").back() == '-');

  // exact tie renders with the upward arrow and a tie flag
  std::vector<CellResult> tie = {
      {"DAE", "original", 10.0, 10.0, 10.0, 10.0},
      {"DAE", "reordered", 10.0, std::nullopt, 10.0, std::nullopt},
  };
  std::string ttable = analysis::render_comparison_table(tie);
  CHECK(ttable.find("(↑ 0.00) [tie]") != std::string::npos);

  // missing cells render as "-" rather than fabricated numbers
  std::vector<CellResult> partial = {{"MASS", "original", 5.0, 5.0, 5.0, 5.0}};
  std::string ptable = analysis::render_comparison_table(partial);
  CHECK(ptable.find("DAE-static") != std::string::npos);
}

TEST_CASE("csv and svg artifacts are written") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path();
  TensorF m(4, 4);
  for (size_t i = 0; i < m.size(); ++i) m.data[i] = float(i) / 16.0f;
  auto csv = dir / "unmtlab_m.csv";
  auto svg = dir / "unmtlab_m.svg";
  analysis::write_matrix_csv(m, csv.string());
  analysis::write_heatmap_svg(m, svg.string(), "test heatmap");
  CHECK(fs::file_size(csv) > 0);
  CHECK(fs::file_size(svg) > 0);

  auto curves_csv = dir / "unmtlab_c.csv";
  auto curves_svg = dir / "unmtlab_c.svg";
  analysis::write_curves_csv({{"a", {1, 2, 3}}, {"b", {3, 2, 1}}}, curves_csv.string());
  analysis::write_curves_svg({{"a", {1, 2, 3}}, {"b", {3, 2, 1}}}, curves_svg.string(), "curves");
  CHECK(fs::file_size(curves_csv) > 0);
  CHECK(fs::file_size(curves_svg) > 0);
  for (auto p : {csv, svg, curves_csv, curves_svg}) fs::remove(p);
}

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <unmtlab/common.hpp>
#include <unmtlab/tensor.hpp>

namespace unmtlab::analysis {

struct PositionSimilarity {
  TensorF matrix;  // P x P cosine similarities
  double neighborhood_width = 0.0;  // mean |{j != i : sim(i,j) >= tau}|
  double tau = 0.5;
  bool zero_norm_warning = false;
};

// Cosine similarity between learned position-embedding rows. Zero-norm rows
// get similarity 0 everywhere (with a warning flag).
PositionSimilarity position_similarity(const TensorF& pos_table, int positions, double tau);

// One grid cell's final scores. Reordered cells leave tgt->src unset.
struct CellResult {
  std::string objective;  // "MASS" or "DAE"
  std::string variant;    // "original" or "reordered"
  std::optional<double> bleu_s2t, bleu_t2s, chrf_s2t, chrf_t2s;
};

// Four-model comparison with (up/down delta) annotations on the reordered
// rows relative to their original-variant counterpart. Missing cells render
// as "-"; exact ties render with the upward convention and a tie flag.
std::string render_comparison_table(const std::vector<CellResult>& cells);
std::string comparison_csv(const std::vector<CellResult>& cells);

// Presentation artifacts: CSV plus a static SVG image.
void write_matrix_csv(const TensorF& m, const std::string& path);
void write_heatmap_svg(const TensorF& m, const std::string& path, const std::string& title);

struct Curve {
  std::string name;
  std::vector<double> values;  // x is the index (epoch)
};
void write_curves_csv(const std::vector<Curve>& curves, const std::string& path);
void write_curves_svg(const std::vector<Curve>& curves, const std::string& path,
                      const std::string& title);

}  // namespace unmtlab::analysis

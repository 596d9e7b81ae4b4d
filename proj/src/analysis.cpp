#include <unmtlab/analysis.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace unmtlab::analysis {

PositionSimilarity position_similarity(const TensorF& pos_table, int positions, double tau) {
  if (positions < 1 || static_cast<size_t>(positions) > pos_table.rows)
    throw PipelineError("eval", "positions out of range for the embedding table");
  const size_t P = static_cast<size_t>(positions);
  const size_t d = pos_table.cols;

  PositionSimilarity out;
  out.tau = tau;
  out.matrix.resize(P, P);

  std::vector<double> norms(P);
  for (size_t i = 0; i < P; ++i) {
    double sq = 0.0;
    for (size_t j = 0; j < d; ++j) sq += double(pos_table.at(i, j)) * pos_table.at(i, j);
    norms[i] = std::sqrt(sq);
    if (norms[i] < 1e-12) out.zero_norm_warning = true;
  }
  for (size_t i = 0; i < P; ++i) {
    for (size_t j = 0; j < P; ++j) {
      if (norms[i] < 1e-12 || norms[j] < 1e-12) {
        out.matrix.at(i, j) = 0.0f;
        continue;
      }
      double dot = 0.0;
      for (size_t k = 0; k < d; ++k) dot += double(pos_table.at(i, k)) * pos_table.at(j, k);
      out.matrix.at(i, j) = static_cast<float>(dot / (norms[i] * norms[j]));
    }
  }
  double width = 0.0;
  for (size_t i = 0; i < P; ++i) {
    int count = 0;
    for (size_t j = 0; j < P; ++j)
      if (j != i && out.matrix.at(i, j) >= tau) ++count;
    width += count;
  }
  out.neighborhood_width = width / static_cast<double>(P);
  return out;
}

namespace {

std::string fmt2(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << v;
  return ss.str();
}

std::string score_cell(const std::optional<double>& v) { return v ? fmt2(*v) : "-"; }

std::string delta_cell(const std::optional<double>& reordered, const std::optional<double>& original) {
  if (!reordered) return "-";
  if (!original) return fmt2(*reordered);
  double delta = *reordered - *original;
  std::string arrow = delta >= 0 ? "↑" : "↓";
  std::string s = fmt2(*reordered) + " (" + arrow + " " + fmt2(std::abs(delta)) + ")";
  if (fmt2(std::abs(delta)) == "0.00") s += " [tie]";
  return s;
}

const CellResult* find_cell(const std::vector<CellResult>& cells, const std::string& objective,
                            const std::string& variant) {
  for (const auto& c : cells)
    if (c.objective == objective && c.variant == variant) return &c;
  return nullptr;
}

}  // namespace

std::string render_comparison_table(const std::vector<CellResult>& cells) {
  const CellResult* mass_o = find_cell(cells, "MASS", "original");
  const CellResult* mass_r = find_cell(cells, "MASS", "reordered");
  const CellResult* dae_o = find_cell(cells, "DAE", "original");
  const CellResult* dae_r = find_cell(cells, "DAE", "reordered");

  struct Row {
    std::string label, s2t, t2s;
  };
  auto rows_for = [&](auto get) {
    std::vector<Row> rows;
    auto opt = [&](const CellResult* c) {
      return c ? get(*c) : std::pair<std::optional<double>, std::optional<double>>{};
    };
    auto [mo_s, mo_t] = opt(mass_o);
    auto [mr_s, mr_t] = opt(mass_r);
    auto [do_s, do_t] = opt(dae_o);
    auto [dr_s, dr_t] = opt(dae_r);
    rows.push_back({"MASS-static", score_cell(mo_s), score_cell(mo_t)});
    rows.push_back({"MASS-static + R", delta_cell(mr_s, mo_s), score_cell(mr_t)});
    rows.push_back({"DAE-static", score_cell(do_s), score_cell(do_t)});
    rows.push_back({"DAE-static + R", delta_cell(dr_s, do_s), score_cell(dr_t)});
    return rows;
  };

  std::ostringstream out;
  auto emit = [&](const std::string& metric, const std::vector<Row>& rows) {
    out << metric << "\n";
    out << "  " << std::left << std::setw(18) << "model" << std::setw(22) << "S->T"
        << "T->S\n";
    for (const auto& r : rows)
      out << "  " << std::left << std::setw(18) << r.label << std::setw(22) << r.s2t << r.t2s
          << "\n";
    out << "\n";
  };
  emit("BLEU", rows_for([](const CellResult& c) {
         return std::make_pair(c.bleu_s2t, c.bleu_t2s);
       }));
  emit("CHRF", rows_for([](const CellResult& c) {
         return std::make_pair(c.chrf_s2t, c.chrf_t2s);
       }));
  return out.str();
}

std::string comparison_csv(const std::vector<CellResult>& cells) {
  std::ostringstream out;
  out << "metric,model,variant,s2t,t2s,delta_s2t\n";
  auto emit = [&](const std::string& metric, auto get) {
    for (const std::string obj : {"MASS", "DAE"}) {
      const CellResult* orig = find_cell(cells, obj, "original");
      const CellResult* reord = find_cell(cells, obj, "reordered");
      auto [o_s, o_t] = orig ? get(*orig) : std::pair<std::optional<double>, std::optional<double>>{};
      auto [r_s, r_t] = reord ? get(*reord) : std::pair<std::optional<double>, std::optional<double>>{};
      out << metric << ',' << obj << ",original," << score_cell(o_s) << ',' << score_cell(o_t)
          << ",\n";
      out << metric << ',' << obj << ",reordered," << score_cell(r_s) << ",-,"
          << (r_s && o_s ? fmt2(*r_s - *o_s) : "") << "\n";
    }
  };
  emit("BLEU", [](const CellResult& c) { return std::make_pair(c.bleu_s2t, c.bleu_t2s); });
  emit("CHRF", [](const CellResult& c) { return std::make_pair(c.chrf_s2t, c.chrf_t2s); });
  return out.str();
}

void write_matrix_csv(const TensorF& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("eval", "cannot write " + path);
  for (size_t i = 0; i < m.rows; ++i) {
    for (size_t j = 0; j < m.cols; ++j) {
      if (j) out << ',';
      out << m.at(i, j);
    }
    out << '\n';
  }
}

namespace {

// light-to-dark color ramp: high similarity renders lighter
std::string ramp_color(double v01) {
  v01 = std::clamp(v01, 0.0, 1.0);
  int r = static_cast<int>(20 + 235 * v01);
  int g = static_cast<int>(24 + 210 * v01);
  int b = static_cast<int>(72 + 150 * v01);
  std::ostringstream ss;
  ss << "rgb(" << r << ',' << g << ',' << b << ')';
  return ss.str();
}

}  // namespace

void write_heatmap_svg(const TensorF& m, const std::string& path, const std::string& title) {
  std::ofstream out(path);
  if (!out) throw PipelineError("eval", "cannot write " + path);
  const int cell = 8, margin = 30;
  const int w = margin * 2 + cell * static_cast<int>(m.cols);
  const int h = margin * 2 + cell * static_cast<int>(m.rows);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<text x='" << margin << "' y='18' font-size='12' font-family='monospace'>" << title
      << "</text>\n";
  float lo = m.data.empty() ? 0.0f : m.data[0], hi = lo;
  for (float v : m.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  float span = hi - lo > 1e-9f ? hi - lo : 1.0f;
  for (size_t i = 0; i < m.rows; ++i)
    for (size_t j = 0; j < m.cols; ++j) {
      double v01 = (m.at(i, j) - lo) / span;
      out << "<rect x='" << margin + cell * static_cast<int>(j) << "' y='"
          << margin + cell * static_cast<int>(i) << "' width='" << cell << "' height='" << cell
          << "' fill='" << ramp_color(v01) << "'/>\n";
    }
  out << "</svg>\n";
}

void write_curves_csv(const std::vector<Curve>& curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("eval", "cannot write " + path);
  out << "epoch";
  for (const auto& c : curves) out << ',' << c.name;
  out << '\n';
  size_t n = 0;
  for (const auto& c : curves) n = std::max(n, c.values.size());
  for (size_t i = 0; i < n; ++i) {
    out << i;
    for (const auto& c : curves) {
      out << ',';
      if (i < c.values.size()) out << c.values[i];
    }
    out << '\n';
  }
}

void write_curves_svg(const std::vector<Curve>& curves, const std::string& path,
                      const std::string& title) {
  std::ofstream out(path);
  if (!out) throw PipelineError("eval", "cannot write " + path);
  const int w = 560, h = 360, ml = 50, mr = 20, mt = 30, mb = 30;
  double lo = 0.0, hi = 1.0;
  size_t n = 1;
  for (const auto& c : curves) {
    for (double v : c.values) hi = std::max(hi, v);
    n = std::max(n, c.values.size());
  }
  const char* colors[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#f39c12"};
  auto px = [&](size_t i) { return ml + (w - ml - mr) * double(i) / double(std::max<size_t>(1, n - 1)); };
  auto py = [&](double v) { return h - mb - (h - mt - mb) * (v - lo) / (hi - lo); };
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<text x='" << ml << "' y='18' font-size='12' font-family='monospace'>" << title
      << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  for (size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c];
    if (curve.values.empty()) continue;
    out << "<polyline fill='none' stroke='" << colors[c % 5] << "' stroke-width='1.5' points='";
    for (size_t i = 0; i < curve.values.size(); ++i)
      out << px(i) << ',' << py(curve.values[i]) << ' ';
    out << "'/>\n";
    out << "<text x='" << w - mr - 160 << "' y='" << mt + 14 * (c + 1)
        << "' font-size='11' font-family='monospace' fill='" << colors[c % 5] << "'>" << curve.name
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace unmtlab::analysis

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unmtlab/analysis.hpp>
#include <unmtlab/model.hpp>
#include <unmtlab/synthlang.hpp>
#include <unmtlab/trainer.hpp>
#include <unmtlab/xembed.hpp>

namespace unmtlab::experiment {

struct ExperimentConfig {
  std::string name = "desk";
  uint64_t master_seed = 1;
  std::string out_dir = "out";

  // synthetic language pair
  int words_per_open_class = 60;
  bool ambiguity_hooks = false;
  int topic_dim = 4;
  double topic_tau = 2.0;
  size_t train_per_side = 20000;
  size_t n_valid = 200;
  size_t n_test = 500;
  double fail_rate = 0.05;

  // subwords / vocabulary
  size_t bpe_merges = 4000;
  int64_t min_count = 1;

  // cross-lingual embeddings
  xembed::SkipgramConfig skipgram;
  int refine_iters = 3;
  int csls_k = 10;
  size_t seed_dict_min = 25;
  bool seed_dict_fallback = true;
  double oracle_seed_fraction = 0.2;
  float emb_scale = 1.0f;

  ModelConfig model;
  trainer::TrainConfig pretrain_cfg;
  trainer::TrainConfig finetune_cfg;

  std::vector<std::string> grid_cells = {"MASS-original", "MASS-reordered", "DAE-original",
                                         "DAE-reordered"};

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
  uint64_t config_hash() const;  // full config
  uint64_t data_hash() const;    // fields that determine prepared data
  uint64_t embed_hash() const;   // fields that determine the embedding stage
  void validate() const;
};

// out/<name>/<stage>/<cell>/ artifact layout
struct Layout {
  std::filesystem::path root;  // out/<name>
  std::filesystem::path prepare() const { return root / "prepare"; }
  std::filesystem::path embed(const std::string& variant) const { return root / "embed" / variant; }
  std::filesystem::path run(const std::string& cell) const { return root / "run" / cell; }
  std::filesystem::path report() const { return root / "report"; }
};

Layout layout_for(const ExperimentConfig& cfg);

void cmd_prepare(const ExperimentConfig& cfg);
void cmd_run(const ExperimentConfig& cfg, std::vector<std::string> cells = {});
void cmd_evaluate(const ExperimentConfig& cfg, std::vector<std::string> cells = {});
void cmd_report(const ExperimentConfig& cfg);
void cmd_noise_debug(const ExperimentConfig& cfg, const std::string& objective, size_t n,
                     uint64_t seed, std::ostream& out);

// Final scores of a finished cell, parsed back from its evaluation report.
analysis::CellResult load_cell_result(const ExperimentConfig& cfg, const std::string& cell);

// Convenience used by the grid-level tests and the acceptance suite: runs
// prepare once and every requested cell, returns their results.
std::vector<analysis::CellResult> run_grid(const ExperimentConfig& cfg,
                                           std::vector<std::string> cells = {});

}  // namespace unmtlab::experiment

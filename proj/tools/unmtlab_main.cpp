// Command-line driver for the unsupervised-NMT word-order lab.
//
//   unmtlab prepare  --config cfg.json
//   unmtlab run      --config cfg.json [--cells DAE-original,...]
//   unmtlab evaluate --config cfg.json [--cells ...]
//   unmtlab report   --config cfg.json
//   unmtlab noise-debug --config cfg.json --objective DAE -n 20
//
// Exit code 0 on success; nonzero with the failing stage named on stderr.

#include <CLI11.hpp>

#include <iostream>

#include <unmtlab/experiment.hpp>
#include <unmtlab/kernels.hpp>

using namespace unmtlab;

namespace {

experiment::ExperimentConfig load_config(const std::string& path, uint64_t seed_override,
                                         const std::string& out_override) {
  experiment::ExperimentConfig cfg = path.empty()
                                         ? experiment::ExperimentConfig{}
                                         : experiment::ExperimentConfig::from_json_file(path);
  if (seed_override != 0) cfg.master_seed = seed_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  cfg.validate();
  return cfg;
}

std::vector<std::string> split_cells(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale unsupervised NMT lab for word-order divergence experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, cells_csv, objective = "DAE";
  uint64_t seed = 0;
  size_t debug_n = 20;
  int threads = 1;

  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--seed", seed, "master seed override");
  app.add_option("--out", out_dir, "output directory override");
  app.add_option("--threads", threads, "OpenMP threads for the kernels");

  auto* prepare = app.add_subcommand("prepare", "generate corpora, reorderings, BPE and vocab");
  auto* run = app.add_subcommand("run", "train and evaluate grid cells");
  run->add_option("--cells", cells_csv, "comma-separated grid cells (default: all)");
  auto* evaluate = app.add_subcommand("evaluate", "recompute evaluation reports from checkpoints");
  evaluate->add_option("--cells", cells_csv, "comma-separated grid cells (default: all)");
  auto* report = app.add_subcommand("report", "emit the comparison table, curves, and heatmaps");
  auto* noise_debug = app.add_subcommand("noise-debug", "stream corruption triples as TSV");
  noise_debug->add_option("--objective", objective, "MASS or DAE");
  noise_debug->add_option("-n", debug_n, "number of sentences");

  for (auto* sub : {prepare, run, evaluate, report, noise_debug}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    kernels::set_threads(threads);
    auto cfg = load_config(config_path, seed, out_dir);
    if (prepare->parsed()) {
      experiment::cmd_prepare(cfg);
      std::cout << "prepared data under " << experiment::layout_for(cfg).prepare().string() << "\n";
    } else if (run->parsed()) {
      experiment::cmd_run(cfg, split_cells(cells_csv));
    } else if (evaluate->parsed()) {
      experiment::cmd_evaluate(cfg, split_cells(cells_csv));
    } else if (report->parsed()) {
      experiment::cmd_report(cfg);
    } else if (noise_debug->parsed()) {
      experiment::cmd_noise_debug(cfg, objective, debug_n, cfg.master_seed + 17, std::cout);
    }
  } catch (const PipelineError& e) {
    std::cerr << "error " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

// psstr: train / run / evaluate the progressive scene-text-removal network.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <psstr/checkpoint.hpp>
#include <psstr/dataset.hpp>
#include <psstr/image_io.hpp>
#include <psstr/losses.hpp>
#include <psstr/metrics.hpp>
#include <psstr/network.hpp>
#include <psstr/synth.hpp>
#include <psstr/trainer.hpp>

namespace fs = std::filesystem;
using namespace psstr;

namespace {

void apply_deterministic_env() {
  const char* v = std::getenv("PSSTR_DETERMINISTIC");
  if (v && *v && std::string(v) != "0") at::set_num_threads(1);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int64_t count = 100;
  int64_t test_count = 0;
  uint64_t seed = 0;
  int64_t size = 64;
};

int run_synth(const SynthArgs& a) {
  SynthConfig cfg;
  cfg.count = a.count;
  cfg.seed = a.seed;
  cfg.image_size = {a.size, a.size};
  cfg.split = "train";
  synth_toy_dataset(a.out, cfg);
  std::cout << "wrote " << cfg.count << " train triplets to " << a.out << std::endl;
  if (a.test_count > 0) {
    cfg.count = a.test_count;
    cfg.split = "test";
    synth_toy_dataset(a.out, cfg);
    std::cout << "wrote " << cfg.count << " test triplets to " << a.out << std::endl;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out;
  std::string split = "train";
  std::string resume;
  TrainConfig cfg;
  int64_t size = 0;  // 0: keep TrainConfig default
  int64_t base_channels = 0;
  bool no_augment = false;
};

TrainConfig finalize_train_config(TrainArgs& a) {
  if (a.size > 0) a.cfg.model.input_size = {a.size, a.size};
  if (a.base_channels > 0) a.cfg.model.base_channels = a.base_channels;
  if (a.no_augment) a.cfg.augment = false;
  a.cfg.weights = LossWeights::for_iterations(a.cfg.model.iterations);
  a.cfg.validate();
  return a.cfg;
}

int run_train(TrainArgs& a) {
  TrainConfig cfg = finalize_train_config(a);
  PairLoaderOptions opts;
  opts.size = cfg.model.input_size;
  auto loaded = load_pairs(a.data, a.split, opts);
  for (const auto& e : loaded.errors) std::cerr << "data: " << e << std::endl;
  if (loaded.samples.empty()) {
    std::cerr << "no training samples under " << a.data << "/" << a.split << std::endl;
    return 1;
  }
  {
    PSSTRNet probe(cfg.model);
    std::cout << "model parameters: " << probe->parameter_count() << " ("
              << probe->parameter_count() / 1e6 << "M, paper target 4.88M)" << std::endl;
  }
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = fs::path(a.resume);
  auto report = train(cfg, loaded.samples, a.out, resume);
  std::cout << "trained " << report.steps << " steps in " << report.seconds << " s; final loss "
            << report.final_loss << "\ncheckpoint: " << report.final_checkpoint.string()
            << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string out;
  bool panels = false;
  int64_t size = 0;  // optional resize
};

torch::Tensor to_tile(const torch::Tensor& t) {
  auto x = t.detach();
  if (x.dim() == 4) x = x.squeeze(0);
  if (x.size(0) == 1) x = x.expand({3, x.size(1), x.size(2)});
  return x.clamp(0.0, 1.0);
}

torch::Tensor panel_strip(const std::vector<torch::Tensor>& tiles) {
  const auto h = tiles[0].size(1);
  auto sep = torch::ones({3, h, 2}, tiles[0].options());
  std::vector<torch::Tensor> parts;
  for (size_t i = 0; i < tiles.size(); ++i) {
    if (i) parts.push_back(sep);
    parts.push_back(tiles[i]);
  }
  return torch::cat(parts, 2);
}

int run_infer(const InferArgs& a) {
  auto loaded = load_model(a.checkpoint);
  auto& model = loaded.model;
  const int64_t iterations = loaded.config.model.iterations;
  const bool fusion = loaded.config.adaptive_fusion;

  std::vector<fs::path> files;
  for (const auto& in : a.inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> inner;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file()) inner.push_back(e.path());
      std::sort(inner.begin(), inner.end());
      files.insert(files.end(), inner.begin(), inner.end());
    } else {
      files.push_back(p);
    }
  }

  fs::create_directories(a.out);
  int failures = 0, written = 0;
  torch::NoGradGuard no_grad;
  for (const auto& file : files) {
    if (!is_image_file(file)) {
      std::cerr << "skip (not an image): " << file.string() << std::endl;
      continue;
    }
    torch::Tensor image;
    try {
      image = load_image(file);
    } catch (const std::exception& e) {
      std::cerr << "skip (unreadable): " << file.string() << ": " << e.what() << std::endl;
      ++failures;
      continue;
    }
    if (a.size > 0)
      image = torch::nn::functional::interpolate(
                  image.unsqueeze(0),
                  torch::nn::functional::InterpolateFuncOptions()
                      .size(std::vector<int64_t>{a.size, a.size})
                      .mode(torch::kBilinear)
                      .align_corners(false))
                  .squeeze(0);
    if (image.size(1) % 4 != 0 || image.size(2) % 4 != 0) {
      std::cerr << "skip (size not divisible by 4, use --size): " << file.string() << std::endl;
      ++failures;
      continue;
    }

    auto batch = image.unsqueeze(0);
    IterationState state = model->initial_state(batch);
    std::vector<IterationState> states;
    for (int64_t i = 0; i < iterations; ++i) {
      state = model->run_iteration(state, batch);
      states.push_back(state);
    }
    torch::Tensor pred, mask;
    if (fusion) {
      std::tie(pred, mask) = adaptive_fuse(states, batch, model->config().epsilon);
    } else {
      pred = states.back().removed;
      mask = states.back().mask;
    }

    const std::string stem = file.stem().string();
    save_image(fs::path(a.out) / (stem + "_out.png"), pred);
    save_image(fs::path(a.out) / (stem + "_mask.png"), mask);
    if (a.panels) {
      // input | raw mask per iteration | output per iteration | final | fused mask
      std::vector<torch::Tensor> tiles{to_tile(batch)};
      for (const auto& s : states) tiles.push_back(to_tile(s.mask_raw));
      for (const auto& s : states) tiles.push_back(to_tile(s.removed));
      tiles.push_back(to_tile(pred));
      tiles.push_back(to_tile(mask));
      save_image(fs::path(a.out) / (stem + "_panels.png"), panel_strip(tiles));
    }
    ++written;
  }
  std::cout << "wrote results for " << written << " image(s) to " << a.out << std::endl;
  if (written == 0) {
    std::cerr << "no images processed" << std::endl;
    return 1;
  }
  return failures ? 1 : 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred_dir, gt_dir;
  std::string checkpoint, data;
  std::string split = "test";
  std::string out;
  int64_t size = 0;
};

void write_summary_reports(const std::string& out_prefix, const DirEvalResult& result,
                           const nlohmann::json& extra) {
  if (out_prefix.empty()) return;
  fs::path prefix(out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  write_report_text(prefix.string() + ".txt", result);
  write_report_json(prefix.string() + ".json", result);
  if (!extra.empty()) {
    std::ifstream in(prefix.string() + ".json");
    nlohmann::json j = nlohmann::json::parse(in);
    in.close();
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream outj(prefix.string() + ".json");
    outj << j.dump(2) << "\n";
  }
}

int run_eval(const EvalArgs& a) {
  if (!a.pred_dir.empty()) {
    auto result = evaluate_dir(a.pred_dir, a.gt_dir);
    std::cout << report_table(result);
    write_summary_reports(a.out, result, {});
    return result.errors.empty() ? 0 : 1;
  }

  auto loaded = load_model(a.checkpoint);
  PairLoaderOptions opts;
  opts.size = loaded.config.model.input_size;
  if (a.size > 0) opts.size = {a.size, a.size};
  auto data = load_pairs(a.data, a.split, opts);
  for (const auto& e : data.errors) std::cerr << "data: " << e << std::endl;
  if (data.samples.empty()) {
    std::cerr << "no samples under " << a.data << "/" << a.split << std::endl;
    return 1;
  }
  auto summary = evaluate_model(loaded.model, data.samples, loaded.config.model.iterations,
                                loaded.config.adaptive_fusion);
  DirEvalResult as_dir;
  as_dir.per_image = summary.per_image;
  as_dir.mean = summary.metrics;
  std::cout << report_table(as_dir);
  std::cout << "mask IoU: " << summary.mask_iou
            << "\ninput baseline psnr: " << summary.input_baseline.psnr << " dB" << std::endl;
  write_summary_reports(a.out, as_dir,
                        {{"mask_iou", summary.mask_iou},
                         {"input_baseline_psnr", summary.input_baseline.psnr}});
  return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string data;
  std::string out;
  std::vector<std::string> configs;
  int64_t epochs = 10;
  int64_t size = 64;
  int64_t base_channels = 0;
  uint64_t seed = 0;
};

struct AblationRow {
  std::string label;
  int64_t iterations;
  bool fusion;
};

const std::vector<AblationRow> kAblationMatrix = {
    {"1It.", 1, false},   {"2It.", 2, false},   {"3It.", 3, false},  {"4It.", 4, false},
    {"2It.+AF", 2, true}, {"3It.+AF", 3, true}, {"4It.+AF", 4, true},
};

int run_ablate(const AblateArgs& a) {
  std::vector<AblationRow> rows;
  if (a.configs.empty()) {
    rows = kAblationMatrix;
  } else {
    for (const auto& want : a.configs) {
      bool found = false;
      for (const auto& row : kAblationMatrix)
        if (row.label == want) {
          rows.push_back(row);
          found = true;
        }
      if (!found) {
        std::cerr << "unknown ablation config: " << want << std::endl;
        return 1;
      }
    }
  }

  PairLoaderOptions opts;
  opts.size = {a.size, a.size};
  auto train_data = load_pairs(a.data, "train", opts);
  auto test_data = load_pairs(a.data, "test", opts);
  if (train_data.samples.empty() || test_data.samples.empty()) {
    std::cerr << "ablate needs train and test splits under " << a.data << std::endl;
    return 1;
  }

  fs::create_directories(a.out);
  nlohmann::json table = nlohmann::json::array();
  char line[256];
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %9s %9s %8s %8s", "config", "PSNR", "MSSIM",
                "MSE", "AGE", "pEPs", "pCEPs");
  std::string text = std::string(line) + "\n";
  for (const auto& row : rows) {
    TrainConfig cfg;
    cfg.model.iterations = row.iterations;
    cfg.model.input_size = {a.size, a.size};
    if (a.base_channels > 0) cfg.model.base_channels = a.base_channels;
    cfg.weights = LossWeights::for_iterations(row.iterations);
    cfg.adaptive_fusion = row.fusion;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.checkpoint_interval = std::max<int64_t>(a.epochs, 1);
    std::cout << "=== " << row.label << " ===" << std::endl;
    auto report = train(cfg, train_data.samples, fs::path(a.out) / "runs" / row.label);
    auto loaded = load_model(report.final_checkpoint);
    auto summary = evaluate_model(loaded.model, test_data.samples, row.iterations, row.fusion);
    const auto& m = summary.metrics;
    std::snprintf(line, sizeof(line), "%-10s %8.3f %8.3f %9.6f %9.4f %8.5f %8.5f",
                  row.label.c_str(), m.psnr, m.mssim, m.mse, m.age, m.peps, m.pceps);
    text += std::string(line) + "\n";
    table.push_back({{"config", row.label},
                     {"iterations", row.iterations},
                     {"adaptive_fusion", row.fusion},
                     {"psnr", m.psnr},
                     {"mssim", m.mssim},
                     {"mse", m.mse},
                     {"age", m.age},
                     {"peps", m.peps},
                     {"pceps", m.pceps},
                     {"mask_iou", summary.mask_iou}});
  }
  std::cout << text;
  std::ofstream(fs::path(a.out) / "ablation.txt") << text;
  std::ofstream(fs::path(a.out) / "ablation.json") << table.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_deterministic_env();

  CLI::App app{"PSSTRNet: progressive segmentation-guided scene text removal"};
  app.require_subcommand(1);
  app.set_config("--config");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic toy dataset");
  synth->add_option("--out", synth_args.out, "output dataset root")->required();
  synth->add_option("--count", synth_args.count, "train sample count")
      ->check(CLI::PositiveNumber);
  synth->add_option("--test-count", synth_args.test_count, "test sample count");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--size", synth_args.size, "square image size");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the network");
  train_cmd->add_option("--data", train_args.data, "dataset root")->required();
  train_cmd->add_option("--out", train_args.out, "run directory")->required();
  train_cmd->add_option("--split", train_args.split, "dataset split to train on");
  train_cmd->add_option("--epochs", train_args.cfg.epochs, "epochs");
  train_cmd->add_option("--batch-size", train_args.cfg.batch_size, "batch size");
  train_cmd->add_option("--lr", train_args.cfg.lr, "initial learning rate");
  train_cmd->add_option("--iterations", train_args.cfg.model.iterations, "network iterations");
  train_cmd->add_flag("--adaptive-fusion,!--no-adaptive-fusion", train_args.cfg.adaptive_fusion,
                      "fuse all iteration outputs (default on)");
  train_cmd->add_option("--size", train_args.size, "square input size");
  train_cmd->add_option("--base-channels", train_args.base_channels, "encoder width knob");
  train_cmd->add_option("--seed", train_args.cfg.seed, "seed");
  train_cmd->add_option("--checkpoint-interval", train_args.cfg.checkpoint_interval,
                        "epochs between checkpoints");
  train_cmd->add_option("--backbone", train_args.cfg.backbone_path,
                        "perceptual backbone weight archive (default: seeded random)");
  train_cmd->add_option("--resume", train_args.resume, "checkpoint to resume from");
  train_cmd->add_flag("--no-augment", train_args.no_augment, "disable data augmentation");

  InferArgs infer_args;
  auto* infer = app.add_subcommand("infer", "run text removal on images");
  infer->add_option("--checkpoint", infer_args.checkpoint, "model checkpoint")->required();
  infer->add_option("--input", infer_args.inputs, "input image file(s) or directory")
      ->required();
  infer->add_option("--out", infer_args.out, "output directory")->required();
  infer->add_flag("--panels", infer_args.panels, "write per-iteration panel strips");
  infer->add_option("--size", infer_args.size, "resize inputs to this square size");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "image-quality evaluation");
  eval_cmd->add_option("--pred-dir", eval_args.pred_dir, "directory of predictions");
  eval_cmd->add_option("--gt-dir", eval_args.gt_dir, "directory of ground truths");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint");
  eval_cmd->add_option("--data", eval_args.data, "dataset root (with --checkpoint)");
  eval_cmd->add_option("--split", eval_args.split, "dataset split");
  eval_cmd->add_option("--size", eval_args.size, "resize to this square size");
  eval_cmd->add_option("--out", eval_args.out, "report path prefix (.txt/.json)");

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "iteration-count x fusion ablation table");
  ablate->add_option("--data", ablate_args.data, "dataset root with train/ and test/")
      ->required();
  ablate->add_option("--out", ablate_args.out, "output directory")->required();
  ablate->add_option("--configs", ablate_args.configs,
                     "subset of configs (e.g. 3It. 3It.+AF); default: all seven");
  ablate->add_option("--epochs", ablate_args.epochs, "training epochs per config");
  ablate->add_option("--size", ablate_args.size, "square input size");
  ablate->add_option("--base-channels", ablate_args.base_channels, "encoder width knob");
  ablate->add_option("--seed", ablate_args.seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (infer->parsed()) return run_infer(infer_args);
    if (eval_cmd->parsed()) {
      const bool dir_mode = !eval_args.pred_dir.empty() || !eval_args.gt_dir.empty();
      const bool ckpt_mode = !eval_args.checkpoint.empty();
      if (dir_mode == ckpt_mode) {
        std::cerr << "eval needs either --pred-dir/--gt-dir or --checkpoint/--data" << std::endl;
        return 1;
      }
      return run_eval(eval_args);
    }
    if (ablate->parsed()) return run_ablate(ablate_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

#include "psstr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>
#include <torch/optim/adam.h>

#include "psstr/checkpoint.hpp"
#include "psstr/image_io.hpp"
#include "psstr/losses.hpp"

namespace psstr {

double lr_at(int64_t epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_every));
}

namespace {

constexpr const char* kModelPrefix = "model/";
constexpr const char* kOptPrefix = "opt/";
constexpr const char* kEpochKey = "trainer/next_epoch";

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups())
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::unique_ptr<FeatureBackbone> make_backbone(const TrainConfig& cfg) {
  if (cfg.backbone_path.empty())
    return std::make_unique<Vgg16Backbone>(Vgg16Backbone::random(cfg.backbone_seed));
  return std::make_unique<Vgg16Backbone>(Vgg16Backbone::load(cfg.backbone_path));
}

// Model weights, Adam moments and the epoch cursor in one archive.
void save_train_checkpoint(const std::filesystem::path& path, PSSTRNet& model,
                           torch::optim::Adam& opt, int64_t next_epoch, const TrainConfig& cfg) {
  NamedParameterSet set;
  for (const auto& [name, t] : named_state_of(*model).entries)
    set.entries[kModelPrefix + name] = t;
  for (const auto& p : model->named_parameters(true)) {
    auto it = opt.state().find(p.value().unsafeGetTensorImpl());
    if (it == opt.state().end()) continue;
    auto& state = static_cast<torch::optim::AdamParamState&>(*it->second);
    set.entries[kOptPrefix + p.key() + "/exp_avg"] = state.exp_avg();
    set.entries[kOptPrefix + p.key() + "/exp_avg_sq"] = state.exp_avg_sq();
    set.entries[kOptPrefix + p.key() + "/step"] =
        torch::tensor(static_cast<float>(state.step()));
  }
  set.entries[kEpochKey] = torch::tensor(static_cast<float>(next_epoch));
  nlohmann::json config{{"type", "psstrnet-checkpoint"}, {"train", to_json(cfg)}};
  save_archive(path, set, config);
}

NamedParameterSet slice_prefix(const NamedParameterSet& set, const std::string& prefix) {
  NamedParameterSet out;
  for (const auto& [name, t] : set.entries)
    if (name.rfind(prefix, 0) == 0) out.entries[name.substr(prefix.size())] = t;
  return out;
}

void restore_optimizer(torch::optim::Adam& opt, PSSTRNet& model, const NamedParameterSet& opt_state) {
  for (const auto& p : model->named_parameters(true)) {
    auto find = [&](const std::string& field) -> const torch::Tensor* {
      auto it = opt_state.entries.find(p.key() + "/" + field);
      return it == opt_state.entries.end() ? nullptr : &it->second;
    };
    const auto* exp_avg = find("exp_avg");
    const auto* exp_avg_sq = find("exp_avg_sq");
    const auto* step = find("step");
    if (!exp_avg || !exp_avg_sq || !step) continue;
    auto state = std::make_unique<torch::optim::AdamParamState>();
    state->exp_avg(exp_avg->clone());
    state->exp_avg_sq(exp_avg_sq->clone());
    state->step(static_cast<int64_t>(step->item<float>()));
    opt.state()[p.value().unsafeGetTensorImpl()] = std::move(state);
  }
}

void dump_diagnostics(const std::filesystem::path& run_dir, const Batch& batch, int64_t epoch,
                      int64_t step, const LossBreakdown& loss) {
  const auto dir = run_dir / "diagnostics";
  std::filesystem::create_directories(dir);
  for (int64_t i = 0; i < batch.input.size(0); ++i) {
    save_image(dir / ("input_" + std::to_string(i) + ".png"), batch.input[i]);
    save_image(dir / ("gt_" + std::to_string(i) + ".png"), batch.gt[i]);
    save_image(dir / ("mask_" + std::to_string(i) + ".png"), batch.mask_gt[i]);
  }
  nlohmann::json meta{{"epoch", epoch},
                      {"step", step},
                      {"rc", loss.rc.item<double>()},
                      {"perceptual", loss.perceptual.item<double>()},
                      {"style", loss.style.item<double>()},
                      {"seg", loss.seg.item<double>()}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
}

}  // namespace

TrainReport train(const TrainConfig& cfg, const std::vector<Sample>& samples,
                  const std::filesystem::path& run_dir,
                  const std::optional<std::filesystem::path>& resume_from) {
  cfg.validate();
  TORCH_CHECK(!samples.empty(), "train: dataset is empty");
  const auto start_time = std::chrono::steady_clock::now();

  std::filesystem::create_directories(run_dir);
  std::ofstream(run_dir / "config.json") << to_json(cfg).dump(2) << "\n";

  torch::manual_seed(cfg.seed);
  PSSTRNet model(cfg.model);
  auto backbone = make_backbone(cfg);
  std::vector<torch::Tensor> params;
  for (auto& p : model->parameters()) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(cfg.lr)
                                     .betas({cfg.adam_beta1, cfg.adam_beta2})
                                     .eps(cfg.adam_eps));

  int64_t start_epoch = 0;
  if (resume_from) {
    Archive archive = load_archive(*resume_from);
    load_state_into(*model, slice_prefix(archive.tensors, kModelPrefix));
    restore_optimizer(opt, model, slice_prefix(archive.tensors, kOptPrefix));
    auto it = archive.tensors.entries.find(kEpochKey);
    if (it != archive.tensors.entries.end())
      start_epoch = static_cast<int64_t>(it->second.item<float>());
  }

  std::ofstream log(run_dir / "train_log.jsonl", std::ios::app);
  if (!log) throw std::runtime_error("train: cannot open log in " + run_dir.string());

  TrainReport report;
  report.run_dir = run_dir;
  report.parameter_count = model->parameter_count();
  const int64_t n = static_cast<int64_t>(samples.size());
  int64_t global_step = start_epoch * ((n + cfg.batch_size - 1) / cfg.batch_size);

  model->train();
  for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    set_lr(opt, lr);

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch), 0x5348ULL));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0;
    int64_t epoch_steps = 0;
    for (int64_t begin = 0; begin < n; begin += cfg.batch_size) {
      const int64_t count = std::min<int64_t>(cfg.batch_size, n - begin);
      std::vector<Sample> batch_samples;
      batch_samples.reserve(static_cast<size_t>(count));
      for (int64_t i = 0; i < count; ++i) {
        const int64_t idx = order[static_cast<size_t>(begin + i)];
        const auto& s = samples[static_cast<size_t>(idx)];
        batch_samples.push_back(
            cfg.augment ? augment(s, mix_seed(cfg.seed, static_cast<uint64_t>(epoch),
                                              static_cast<uint64_t>(idx)))
                        : s);
      }
      Batch batch = stack_samples(batch_samples, 0, count);

      opt.zero_grad();
      auto result = model->forward(batch.input);
      std::vector<torch::Tensor> outs, masks;
      for (const auto& s : result.states) {
        outs.push_back(s.removed);
        masks.push_back(s.mask);
      }
      auto loss = total_loss(outs, masks, batch.gt, batch.mask_gt, *backbone, cfg.weights);
      const double total = loss.total.item<double>();
      if (!std::isfinite(total)) {
        dump_diagnostics(run_dir, batch, epoch, global_step, loss);
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " step " + std::to_string(global_step) +
                                 "; offending batch dumped to " +
                                 (run_dir / "diagnostics").string());
      }
      loss.total.backward();
      opt.step();

      nlohmann::json line{{"epoch", epoch},
                          {"step", global_step},
                          {"lr", lr},
                          {"rc", loss.rc.item<double>()},
                          {"perceptual", loss.perceptual.item<double>()},
                          {"style", loss.style.item<double>()},
                          {"seg", loss.seg.item<double>()},
                          {"total", total}};
      log << line.dump() << "\n";
      log.flush();

      epoch_loss += total;
      ++epoch_steps;
      ++global_step;
      report.final_loss = total;
    }

    std::cout << "epoch " << (epoch + 1) << "/" << cfg.epochs << "  loss "
              << (epoch_loss / std::max<int64_t>(1, epoch_steps)) << "  lr " << lr << std::endl;

    if ((epoch + 1) % cfg.checkpoint_interval == 0 && epoch + 1 < cfg.epochs) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04lld.ckpt",
                    static_cast<long long>(epoch + 1));
      save_train_checkpoint(run_dir / name, model, opt, epoch + 1, cfg);
    }
  }

  report.final_checkpoint = run_dir / "final.ckpt";
  save_train_checkpoint(report.final_checkpoint, model, opt, cfg.epochs, cfg);
  report.steps = global_step;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

EvalSummary evaluate_model(PSSTRNet& model, const std::vector<Sample>& samples,
                           int64_t iterations, bool adaptive_fusion, int64_t batch_size) {
  TORCH_CHECK(!samples.empty(), "evaluate_model: dataset is empty");
  TORCH_CHECK(iterations >= 1, "evaluate_model: iterations must be >= 1");
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;

  EvalSummary summary;
  std::vector<std::pair<std::string, MetricReport>> baseline_rows;
  double iou_sum = 0;
  const int64_t n = static_cast<int64_t>(samples.size());
  for (int64_t begin = 0; begin < n; begin += batch_size) {
    const int64_t count = std::min<int64_t>(batch_size, n - begin);
    Batch batch = stack_samples(samples, begin, count);

    IterationState state = model->initial_state(batch.input);
    std::vector<IterationState> states;
    for (int64_t i = 0; i < iterations; ++i) {
      state = model->run_iteration(state, batch.input);
      states.push_back(state);
    }
    torch::Tensor pred, mask;
    if (adaptive_fusion) {
      std::tie(pred, mask) = adaptive_fuse(states, batch.input, model->config().epsilon);
    } else {
      pred = states.back().removed;
      mask = states.back().mask;
    }

    for (int64_t i = 0; i < count; ++i) {
      const auto& name = samples[static_cast<size_t>(begin + i)].name;
      summary.per_image.emplace_back(name, compute_metrics(pred[i], batch.gt[i]));
      baseline_rows.emplace_back(name, compute_metrics(batch.input[i], batch.gt[i]));
      iou_sum += mask_iou(mask[i], batch.mask_gt[i]);
    }
  }
  summary.metrics = mean_report(summary.per_image);
  summary.input_baseline = mean_report(baseline_rows);
  summary.mask_iou = iou_sum / static_cast<double>(n);
  if (was_training) model->train();
  return summary;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  Archive archive = load_archive(checkpoint);
  if (!archive.config.contains("train"))
    throw std::runtime_error("load_model: " + checkpoint.string() +
                             " does not embed a training config");
  LoadedModel loaded;
  loaded.config = train_config_from_json(archive.config.at("train"));
  loaded.model = PSSTRNet(loaded.config.model);
  load_state_into(*loaded.model, slice_prefix(archive.tensors, kModelPrefix));
  loaded.model->eval();
  return loaded;
}

void save_model_checkpoint(const std::filesystem::path& path, PSSTRNet& model,
                           const TrainConfig& cfg) {
  NamedParameterSet set;
  for (const auto& [name, t] : named_state_of(*model).entries)
    set.entries[kModelPrefix + name] = t;
  nlohmann::json config{{"type", "psstrnet-checkpoint"}, {"train", to_json(cfg)}};
  save_archive(path, set, config);
}

}  // namespace psstr

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psstr/backbone.hpp"
#include "psstr/config.hpp"
#include "psstr/dataset.hpp"
#include "psstr/metrics.hpp"
#include "psstr/network.hpp"

namespace psstr {

// Step-decayed learning rate: lr * decay^(epoch / every), epoch 0-based.
double lr_at(int64_t epoch, const TrainConfig& cfg);

struct TrainReport {
  std::filesystem::path run_dir;
  std::filesystem::path final_checkpoint;
  int64_t steps = 0;
  double final_loss = 0;
  int64_t parameter_count = 0;
  double seconds = 0;
};

// Full training loop: Adam, per-epoch lr decay, JSONL loss log, periodic and
// final checkpoints (model + optimizer state + config). Aborts with a
// diagnostic dump on non-finite loss. resume_from continues a saved run.
TrainReport train(const TrainConfig& cfg, const std::vector<Sample>& samples,
                  const std::filesystem::path& run_dir,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt);

struct EvalSummary {
  MetricReport metrics;           // model output vs gt, averaged per image
  MetricReport input_baseline;    // unmodified input vs gt
  double mask_iou = 0;            // fused mask vs mask_gt, averaged per image
  std::vector<std::pair<std::string, MetricReport>> per_image;
};

EvalSummary evaluate_model(PSSTRNet& model, const std::vector<Sample>& samples,
                           int64_t iterations, bool adaptive_fusion, int64_t batch_size = 8);

// Restores a model (and the training config it was saved with).
struct LoadedModel {
  PSSTRNet model{nullptr};
  TrainConfig config;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

void save_model_checkpoint(const std::filesystem::path& path, PSSTRNet& model,
                           const TrainConfig& cfg);

}  // namespace psstr

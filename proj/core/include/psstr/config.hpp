#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace psstr {

// Hyperparameters of the network itself. The widths of the five encoder
// stages are (1,2,4,4,4) * base_channels; the bottleneck sits at 1/4 of the
// input resolution.
struct PSSTRNetConfig {
  int64_t iterations = 3;
  int64_t base_channels = 36;
  std::vector<int64_t> ce_dilations = {1, 2, 3, 5};
  double epsilon = 1e-8;
  std::array<int64_t, 2> input_size = {256, 256};

  std::array<int64_t, 5> stage_channels() const;
  // Throws std::invalid_argument on violated invariants.
  void validate() const;
};

struct LossWeights {
  double gamma_text = 50.0;      // text-region L1 weight
  double gamma_background = 10.0;  // non-text-region L1 weight
  std::vector<double> gamma_seg = {1.0, 2.0, 3.0};  // per-iteration dice weights
  double w_style = 200.0;
  double w_perceptual = 0.1;

  // gamma_seg = (1, 2, ..., n).
  static LossWeights for_iterations(int64_t n);
  void validate(int64_t iterations) const;
};

struct TrainConfig {
  PSSTRNetConfig model;
  LossWeights weights;

  double lr = 1e-3;
  double lr_decay = 0.5;
  int64_t lr_decay_every = 10;  // epochs
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int64_t batch_size = 6;
  int64_t epochs = 30;
  bool adaptive_fusion = true;
  bool augment = true;
  uint64_t seed = 0;
  int64_t checkpoint_interval = 10;  // epochs; final checkpoint is always written
  std::string backbone_path;         // empty -> seeded random backbone
  uint64_t backbone_seed = 2022;

  void validate() const;
};

nlohmann::json to_json(const PSSTRNetConfig& cfg);
nlohmann::json to_json(const LossWeights& w);
nlohmann::json to_json(const TrainConfig& cfg);
PSSTRNetConfig psstrnet_config_from_json(const nlohmann::json& j);
LossWeights loss_weights_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace psstr

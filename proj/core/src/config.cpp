#include "psstr/config.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace psstr {

std::array<int64_t, 5> PSSTRNetConfig::stage_channels() const {
  const int64_t c = base_channels;
  return {c, 2 * c, 4 * c, 4 * c, 4 * c};
}

void PSSTRNetConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (base_channels < 1) throw std::invalid_argument("base_channels must be >= 1");
  if (epsilon <= 0) throw std::invalid_argument("epsilon must be > 0");
  if (ce_dilations.empty()) throw std::invalid_argument("ce_dilations must be non-empty");
  for (size_t i = 1; i < ce_dilations.size(); ++i) {
    if (ce_dilations[i] <= ce_dilations[i - 1])
      throw std::invalid_argument("ce_dilations must be strictly increasing");
  }
  if (input_size[0] % 4 != 0 || input_size[1] % 4 != 0)
    throw std::invalid_argument("input_size must be divisible by 4");
}

LossWeights LossWeights::for_iterations(int64_t n) {
  LossWeights w;
  w.gamma_seg.clear();
  for (int64_t i = 1; i <= n; ++i) w.gamma_seg.push_back(static_cast<double>(i));
  return w;
}

void LossWeights::validate(int64_t iterations) const {
  if (gamma_text < 0 || gamma_background < 0 || w_style < 0 || w_perceptual < 0)
    throw std::invalid_argument("loss weights must be >= 0");
  for (double g : gamma_seg)
    if (g < 0) throw std::invalid_argument("gamma_seg entries must be >= 0");
  if (static_cast<int64_t>(gamma_seg.size()) != iterations)
    throw std::invalid_argument("len(gamma_seg) must equal the iteration count");
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate(model.iterations);
  if (lr <= 0) throw std::invalid_argument("lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (lr_decay_every < 1) throw std::invalid_argument("lr_decay_every must be >= 1");
  if (checkpoint_interval < 1) throw std::invalid_argument("checkpoint_interval must be >= 1");
}

nlohmann::json to_json(const PSSTRNetConfig& cfg) {
  return {{"iterations", cfg.iterations},
          {"base_channels", cfg.base_channels},
          {"ce_dilations", cfg.ce_dilations},
          {"epsilon", cfg.epsilon},
          {"input_size", cfg.input_size}};
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"gamma_text", w.gamma_text},
          {"gamma_background", w.gamma_background},
          {"gamma_seg", w.gamma_seg},
          {"w_style", w.w_style},
          {"w_perceptual", w.w_perceptual}};
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"model", to_json(cfg.model)},
          {"weights", to_json(cfg.weights)},
          {"lr", cfg.lr},
          {"lr_decay", cfg.lr_decay},
          {"lr_decay_every", cfg.lr_decay_every},
          {"adam_beta1", cfg.adam_beta1},
          {"adam_beta2", cfg.adam_beta2},
          {"adam_eps", cfg.adam_eps},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"adaptive_fusion", cfg.adaptive_fusion},
          {"augment", cfg.augment},
          {"seed", cfg.seed},
          {"checkpoint_interval", cfg.checkpoint_interval},
          {"backbone_path", cfg.backbone_path},
          {"backbone_seed", cfg.backbone_seed}};
}

PSSTRNetConfig psstrnet_config_from_json(const nlohmann::json& j) {
  PSSTRNetConfig cfg;
  cfg.iterations = j.at("iterations").get<int64_t>();
  cfg.base_channels = j.at("base_channels").get<int64_t>();
  cfg.ce_dilations = j.at("ce_dilations").get<std::vector<int64_t>>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.input_size = j.at("input_size").get<std::array<int64_t, 2>>();
  return cfg;
}

LossWeights loss_weights_from_json(const nlohmann::json& j) {
  LossWeights w;
  w.gamma_text = j.at("gamma_text").get<double>();
  w.gamma_background = j.at("gamma_background").get<double>();
  w.gamma_seg = j.at("gamma_seg").get<std::vector<double>>();
  w.w_style = j.at("w_style").get<double>();
  w.w_perceptual = j.at("w_perceptual").get<double>();
  return w;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.model = psstrnet_config_from_json(j.at("model"));
  cfg.weights = loss_weights_from_json(j.at("weights"));
  cfg.lr = j.at("lr").get<double>();
  cfg.lr_decay = j.at("lr_decay").get<double>();
  cfg.lr_decay_every = j.at("lr_decay_every").get<int64_t>();
  cfg.adam_beta1 = j.at("adam_beta1").get<double>();
  cfg.adam_beta2 = j.at("adam_beta2").get<double>();
  cfg.adam_eps = j.at("adam_eps").get<double>();
  cfg.batch_size = j.at("batch_size").get<int64_t>();
  cfg.epochs = j.at("epochs").get<int64_t>();
  cfg.adaptive_fusion = j.at("adaptive_fusion").get<bool>();
  cfg.augment = j.at("augment").get<bool>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.checkpoint_interval = j.at("checkpoint_interval").get<int64_t>();
  cfg.backbone_path = j.at("backbone_path").get<std::string>();
  cfg.backbone_seed = j.at("backbone_seed").get<uint64_t>();
  return cfg;
}

}  // namespace psstr

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <torch/torch.h>

namespace psstr {

// Feature taps for the perceptual and style losses. Gradients flow through to
// the input; the extractor's own weights stay frozen.
class FeatureBackbone {
 public:
  virtual ~FeatureBackbone() = default;
  virtual std::vector<torch::Tensor> features(const torch::Tensor& images) const = 0;
};

// VGG-16 feature prefix through relu5_1, tapped after the first ReLU of each
// of the five blocks. Inputs are expected in [0,1] RGB and are normalized with
// the usual channel statistics internally.
class Vgg16Backbone final : public FeatureBackbone {
 public:
  // Deterministically initialized frozen weights.
  static Vgg16Backbone random(uint64_t seed);
  // Loads a weight archive; throws std::runtime_error if unreadable or
  // incompatible (a configuration error, not a shape error).
  static Vgg16Backbone load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  std::vector<torch::Tensor> features(const torch::Tensor& images) const override;
  int64_t parameter_count() const;
  void to(torch::Dtype dtype);

 private:
  Vgg16Backbone();
  std::shared_ptr<struct Vgg16FeaturesImpl> layers_;
};

}  // namespace psstr

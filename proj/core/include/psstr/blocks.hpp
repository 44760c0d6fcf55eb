#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace psstr {

// conv3x3-bn-relu-conv3x3-bn with identity skip, relu after the add.
struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
};
TORCH_MODULE(ResidualBlock);

// conv(k, stride) - bn - relu - residual block. The building unit of both the
// encoder and the removal decoder.
struct ConvStageImpl : torch::nn::Module {
  ConvStageImpl(int64_t in_channels, int64_t out_channels, int64_t kernel, int64_t stride);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d bn{nullptr};
  ResidualBlock res{nullptr};
};
TORCH_MODULE(ConvStage);

// Context exploration: parallel dilated 3x3 convolutions, channel concat,
// 1x1 fusion. Spatial size is preserved.
struct ContextExplorationImpl : torch::nn::Module {
  ContextExplorationImpl(int64_t channels, std::vector<int64_t> dilations);
  torch::Tensor forward(const torch::Tensor& x);

  std::vector<torch::nn::Conv2d> branches;
  torch::nn::Conv2d fuse{nullptr};
  std::vector<int64_t> dilations;
};
TORCH_MODULE(ContextExploration);

// Text region positioning: a small conv head on the bottleneck feature.
// Produces the pre-mask feature z0 and a quarter-resolution soft mask.
struct TrpmImpl : torch::nn::Module {
  explicit TrpmImpl(int64_t channels);
  // returns {z0, quarter-scale mask in [0,1]}
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& bottleneck);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, proj{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
};
TORCH_MODULE(Trpm);

// Correcting block of the Mask-Update module. Suppresses false positives and
// recovers false negatives at quarter scale:
//   i_t = z0 * m,  i_b = z0 * (1 - m)
//   fp = CE(i_t),  fn = CE(i_b)
//   z  = relu(bn(z0 - alpha * fp));  z = relu(bn(z + beta * fn))
//   out = sigmoid(proj(z))
struct MaskCorrectionImpl : torch::nn::Module {
  MaskCorrectionImpl(int64_t channels, std::vector<int64_t> dilations);
  // m_comp_quarter: (b,1,h,w); z0: (b,C,h,w) -> corrected quarter mask (b,1,h,w)
  torch::Tensor forward(const torch::Tensor& m_comp_quarter, const torch::Tensor& z0);

  ContextExploration ce_fp{nullptr}, ce_fn{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  torch::nn::Conv2d proj{nullptr};
  torch::Tensor alpha, beta;  // learnable scalars, initialized to 1
};
TORCH_MODULE(MaskCorrection);

}  // namespace psstr

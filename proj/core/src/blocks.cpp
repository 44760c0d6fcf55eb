#include "psstr/blocks.hpp"

namespace psstr {

using torch::nn::BatchNorm2d;
using torch::nn::BatchNorm2dOptions;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;

ResidualBlockImpl::ResidualBlockImpl(int64_t channels) {
  conv1 = register_module(
      "conv1", Conv2d(Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
  bn1 = register_module("bn1", BatchNorm2d(channels));
  conv2 = register_module(
      "conv2", Conv2d(Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
  bn2 = register_module("bn2", BatchNorm2d(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1->forward(conv1->forward(x)));
  y = bn2->forward(conv2->forward(y));
  return torch::relu(x + y);
}

ConvStageImpl::ConvStageImpl(int64_t in_channels, int64_t out_channels, int64_t kernel,
                             int64_t stride) {
  conv = register_module("conv", Conv2d(Conv2dOptions(in_channels, out_channels, kernel)
                                            .stride(stride)
                                            .padding(kernel / 2)
                                            .bias(false)));
  bn = register_module("bn", BatchNorm2d(out_channels));
  res = register_module("res", ResidualBlock(out_channels));
}

torch::Tensor ConvStageImpl::forward(const torch::Tensor& x) {
  return res->forward(torch::relu(bn->forward(conv->forward(x))));
}

ContextExplorationImpl::ContextExplorationImpl(int64_t channels, std::vector<int64_t> rates)
    : dilations(std::move(rates)) {
  TORCH_CHECK(!dilations.empty(), "ContextExploration: no dilation rates");
  TORCH_CHECK(channels % static_cast<int64_t>(dilations.size()) == 0,
              "ContextExploration: channels (", channels, ") not divisible by branch count (",
              dilations.size(), ")");
  const int64_t branch_channels = channels / static_cast<int64_t>(dilations.size());
  for (size_t i = 0; i < dilations.size(); ++i) {
    auto conv = Conv2d(Conv2dOptions(channels, branch_channels, 3)
                           .padding(dilations[i])
                           .dilation(dilations[i]));
    branches.push_back(register_module("branch" + std::to_string(i), conv));
  }
  fuse = register_module("fuse", Conv2d(Conv2dOptions(channels, channels, 1)));
}

torch::Tensor ContextExplorationImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> outs;
  outs.reserve(branches.size());
  for (auto& branch : branches) outs.push_back(branch->forward(x));
  return fuse->forward(torch::cat(outs, 1));
}

TrpmImpl::TrpmImpl(int64_t channels) {
  conv1 = register_module("conv1",
                          Conv2d(Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
  bn1 = register_module("bn1", BatchNorm2d(channels));
  conv2 = register_module("conv2",
                          Conv2d(Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
  bn2 = register_module("bn2", BatchNorm2d(channels));
  proj = register_module("proj", Conv2d(Conv2dOptions(channels, 1, 1)));
}

std::pair<torch::Tensor, torch::Tensor> TrpmImpl::forward(const torch::Tensor& bottleneck) {
  auto z = torch::relu(bn1->forward(conv1->forward(bottleneck)));
  z = torch::relu(bn2->forward(conv2->forward(z)));
  auto mask = torch::sigmoid(proj->forward(z));
  return {z, mask};
}

MaskCorrectionImpl::MaskCorrectionImpl(int64_t channels, std::vector<int64_t> dilations) {
  ce_fp = register_module("ce_fp", ContextExploration(channels, dilations));
  ce_fn = register_module("ce_fn", ContextExploration(channels, dilations));
  bn1 = register_module("bn1", BatchNorm2d(channels));
  bn2 = register_module("bn2", BatchNorm2d(channels));
  proj = register_module("proj", Conv2d(Conv2dOptions(channels, 1, 1)));
  alpha = register_parameter("alpha", torch::ones({}));
  beta = register_parameter("beta", torch::ones({}));
}

torch::Tensor MaskCorrectionImpl::forward(const torch::Tensor& m_comp_quarter,
                                          const torch::Tensor& z0) {
  auto text_feat = z0 * m_comp_quarter;
  auto background_feat = z0 * (1.0 - m_comp_quarter);
  auto false_pos = ce_fp->forward(text_feat);
  auto false_neg = ce_fn->forward(background_feat);
  auto z = torch::relu(bn1->forward(z0 - alpha * false_pos));
  z = torch::relu(bn2->forward(z + beta * false_neg));
  return torch::sigmoid(proj->forward(z));
}

}  // namespace psstr

#pragma once

#include <vector>

#include <torch/torch.h>

#include "psstr/backbone.hpp"
#include "psstr/config.hpp"

namespace psstr {

// Scalar (0-dim) tensors so the breakdown stays differentiable; total is the
// weighted sum of the components by construction.
struct LossBreakdown {
  torch::Tensor rc;
  torch::Tensor perceptual;
  torch::Tensor style;
  torch::Tensor seg;
  torch::Tensor total;
};

// Weighted L1 reconstruction over text and non-text regions, summed over
// iteration outputs. Norms are per-element means.
torch::Tensor region_content_loss(const std::vector<torch::Tensor>& outs,
                                  const torch::Tensor& gt, const torch::Tensor& m_gt,
                                  const LossWeights& w);

// Mean L1 between backbone activations of each output and the ground truth.
torch::Tensor perceptual_loss(const std::vector<torch::Tensor>& outs, const torch::Tensor& gt,
                              const FeatureBackbone& backbone);

// Per-sample channel Gram matrices of a (b,C,h,w) feature map, normalized by
// C*h*w. Returns (b,C,C).
torch::Tensor gram(const torch::Tensor& f);

// Mean L1 between Gram matrices of backbone activations.
torch::Tensor style_loss(const std::vector<torch::Tensor>& outs, const torch::Tensor& gt,
                         const FeatureBackbone& backbone);

// Dice loss with squared denominator terms, smoothed by 1e-6, weighted per
// iteration by w.gamma_seg.
torch::Tensor dice_segmentation_loss(const std::vector<torch::Tensor>& masks,
                                     const torch::Tensor& m_gt, const LossWeights& w);

LossBreakdown total_loss(const std::vector<torch::Tensor>& outs,
                         const std::vector<torch::Tensor>& masks, const torch::Tensor& gt,
                         const torch::Tensor& m_gt, const FeatureBackbone& backbone,
                         const LossWeights& w);

}  // namespace psstr

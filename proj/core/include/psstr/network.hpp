#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

#include "psstr/blocks.hpp"
#include "psstr/config.hpp"
#include "psstr/ops.hpp"

namespace psstr {

struct ForwardResult {
  torch::Tensor output;      // fused removal result, (b,3,H,W), clamped to [0,1]
  torch::Tensor fused_mask;  // mean mask M', (b,1,H,W)
  std::vector<IterationState> states;
};

// The progressive segmentation-guided removal network: a shared residual
// encoder feeding a text segmentation branch (TRPM + mask update) and a text
// removal branch (mirrored residual decoder). One set of weights is reused
// across iterations.
struct PSSTRNetImpl : torch::nn::Module {
  explicit PSSTRNetImpl(PSSTRNetConfig cfg = {});

  // stack = concat(i_in, previous removal, previous mask) -> 7 channels.
  // Returns the five stage outputs, shallow to deep; bottleneck at 1/4 scale.
  std::vector<torch::Tensor> encode(const torch::Tensor& stack);

  // Segmentation branch head: full-resolution raw mask in [0,1].
  torch::Tensor segment_text(const std::vector<torch::Tensor>& features);
  // Raw mask together with the pre-mask feature z0 the correction consumes.
  std::pair<torch::Tensor, torch::Tensor> segment_text_with_feature(
      const std::vector<torch::Tensor>& features);

  // Mask-update correction, full resolution in and out.
  torch::Tensor correct_mask(const torch::Tensor& m_comp, const torch::Tensor& z0);

  // Removal branch: decoder over the shared features, sigmoid RGB output.
  torch::Tensor remove_text(const std::vector<torch::Tensor>& features);

  // Iteration 0 convention: removed = i_in, mask = 0.
  IterationState initial_state(const torch::Tensor& i_in) const;

  IterationState run_iteration(const IterationState& prev, const torch::Tensor& i_in);

  ForwardResult forward(const torch::Tensor& i_in);

  int64_t parameter_count() const;
  const PSSTRNetConfig& config() const { return cfg_; }

  // shared encoder
  std::vector<ConvStage> enc_stages;
  // removal decoder
  std::vector<ConvStage> dec_stages;
  torch::nn::Conv2d dec_out{nullptr};
  // segmentation branch
  Trpm trpm{nullptr};
  MaskCorrection correction{nullptr};

 private:
  PSSTRNetConfig cfg_;
};
TORCH_MODULE(PSSTRNet);

}  // namespace psstr

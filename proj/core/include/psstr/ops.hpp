#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

namespace psstr {

// Input-contract checks. All throw c10::Error with a readable message.
void check_image(const torch::Tensor& t, const char* what = "image");   // (b,3,H,W), finite, H,W % 4 == 0
void check_mask(const torch::Tensor& t, const char* what = "mask");     // (b,1,H,W), values in [0,1]
void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const char* what);

// One iteration's worth of intermediates.
struct IterationState {
  int64_t index = 0;           // 1-based
  torch::Tensor removed;       // composited removal result, (b,3,H,W)
  torch::Tensor mask;          // corrected text mask, (b,1,H,W)
  torch::Tensor mask_raw;      // segmentation-branch mask before merging, (b,1,H,W)
  torch::Tensor mask_merged;   // elementwise max of mask_raw and the previous mask, (b,1,H,W)
};

// Elementwise maximum of the current raw mask and the previous mask.
torch::Tensor merge_masks(const torch::Tensor& m_temp, const torch::Tensor& m_prev);

// Keeps non-text regions of i_in and takes text regions from i_temp:
// i_in * (1 - m) + i_temp * m.
torch::Tensor compose_region(const torch::Tensor& i_in, const torch::Tensor& i_temp,
                             const torch::Tensor& m);

// Mask-weighted fusion of all iteration outputs over the input image.
// Returns (fused image, mean mask). With clamp=false the raw smoothed value is
// returned (can exceed [0,1] by ~epsilon).
std::pair<torch::Tensor, torch::Tensor> adaptive_fuse(const std::vector<IterationState>& states,
                                                      const torch::Tensor& i_in, double epsilon,
                                                      bool clamp = true);

// Two chained x2 bilinear upsamplings (align_corners off), quarter scale -> full.
torch::Tensor upsample_quarter(const torch::Tensor& x);

// Area-average downsampling to 1/4 resolution.
torch::Tensor downsample_quarter(const torch::Tensor& x);

}  // namespace psstr

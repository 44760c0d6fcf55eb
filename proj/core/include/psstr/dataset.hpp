#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace psstr {

struct Sample {
  std::string name;
  torch::Tensor input;    // (3,H,W) in [0,1]
  torch::Tensor gt;       // (3,H,W) in [0,1]
  torch::Tensor mask_gt;  // (1,H,W) binary
};

// Binary text mask by channel-max absolute subtraction followed by square
// dilation: (max_c |input - gt| > threshold) dilated with radius r.
torch::Tensor derive_mask(const torch::Tensor& input, const torch::Tensor& gt,
                          double threshold, int64_t dilate_radius);

struct PairLoaderOptions {
  std::string input_subdir = "input";
  std::string gt_subdir = "gt";
  std::string mask_subdir = "mask";  // consumed when present, else mask is derived
  std::array<int64_t, 2> size = {256, 256};
  double mask_threshold = 25.0 / 255.0;
  int64_t dilate_radius = 3;
};

struct LoadResult {
  std::vector<Sample> samples;  // lexicographic by name
  std::vector<std::string> errors;
};

// Loads name-matched pairs from root/split/{input,gt}[,mask]. Unreadable or
// unmatched files become error entries; loading continues.
LoadResult load_pairs(const std::filesystem::path& root, const std::string& split,
                      const PairLoaderOptions& opts = {});

// Deterministic augmentation primitives; mask is re-binarized at 0.5.
Sample hflip(const Sample& s);
Sample rotate(const Sample& s, double degrees);

// Random horizontal flip (p=0.5) and rotation in [-10, 10] degrees, fully
// determined by the seed.
Sample augment(const Sample& s, uint64_t seed);

// Stacks samples into (n,3,H,W) / (n,1,H,W) batch tensors.
struct Batch {
  torch::Tensor input, gt, mask_gt;
};
Batch stack_samples(const std::vector<Sample>& samples, int64_t begin, int64_t count);

// splitmix64-based stream for deriving per-sample seeds from (seed, indices).
uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0);

}  // namespace psstr

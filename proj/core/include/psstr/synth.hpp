#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace psstr {

// Desk-scale synthetic text-on-texture generator. Backgrounds are smooth
// gradients with soft blobs; glyph strings are rendered from a built-in 5x7
// bitmap font with hard (binary) coverage, so the recorded mask is exact and
// pixels outside it are untouched.
struct SynthConfig {
  int64_t count = 100;
  std::array<int64_t, 2> image_size = {64, 64};
  std::array<int64_t, 2> strings_per_image = {1, 4};
  std::array<int64_t, 2> glyphs_per_string = {2, 5};
  std::array<int64_t, 2> glyph_height = {10, 18};  // pixels
  uint64_t seed = 0;
  std::string split = "train";

  void validate() const;  // throws std::invalid_argument
};

struct SynthSample {
  torch::Tensor input, gt;  // (3,H,W)
  torch::Tensor mask;       // (1,H,W) binary
};

// One sample, deterministic in (cfg.seed, index).
SynthSample synth_sample(const SynthConfig& cfg, int64_t index);

// Writes root/split/{input,gt,mask}/NNNNNN.png for cfg.count samples.
void synth_toy_dataset(const std::filesystem::path& root, const SynthConfig& cfg);

}  // namespace psstr

#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace psstr {

bool is_image_file(const std::filesystem::path& p);

// Decodes an 8-bit raster file to a (3,H,W) float tensor in [0,1] (RGB).
// Throws std::runtime_error on failure.
torch::Tensor load_image(const std::filesystem::path& p);

// Encodes a (3,H,W), (1,H,W) or singleton-batch tensor in [0,1] as an 8-bit
// image. Format follows the extension.
void save_image(const std::filesystem::path& p, const torch::Tensor& t);

// Nearest 8-bit value; the quantization used everywhere an image leaves the
// float domain.
inline int quantize8(double v) {
  double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<int>(c * 255.0 + 0.5);
}

}  // namespace psstr

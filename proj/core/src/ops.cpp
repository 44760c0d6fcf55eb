#include "psstr/ops.hpp"

namespace F = torch::nn::functional;

namespace psstr {

void check_image(const torch::Tensor& t, const char* what) {
  TORCH_CHECK(t.defined() && t.dim() == 4 && t.size(1) == 3, what,
              ": expected shape (b,3,H,W), got ", t.defined() ? t.sizes() : torch::IntArrayRef{});
  TORCH_CHECK(t.size(2) % 4 == 0 && t.size(3) % 4 == 0, what,
              ": H and W must be divisible by 4, got ", t.size(2), "x", t.size(3));
  TORCH_CHECK(t.isfinite().all().item<bool>(), what, ": non-finite values");
}

void check_mask(const torch::Tensor& t, const char* what) {
  TORCH_CHECK(t.defined() && t.dim() == 4 && t.size(1) == 1, what,
              ": expected shape (b,1,H,W), got ", t.defined() ? t.sizes() : torch::IntArrayRef{});
  TORCH_CHECK(t.min().item<double>() >= 0.0 && t.max().item<double>() <= 1.0, what,
              ": values outside [0,1]");
}

void check_same_spatial(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  TORCH_CHECK(a.size(0) == b.size(0) && a.size(2) == b.size(2) && a.size(3) == b.size(3), what,
              ": batch/spatial mismatch, ", a.sizes(), " vs ", b.sizes());
}

torch::Tensor merge_masks(const torch::Tensor& m_temp, const torch::Tensor& m_prev) {
  TORCH_CHECK(m_temp.sizes() == m_prev.sizes(), "merge_masks: shape mismatch, ", m_temp.sizes(),
              " vs ", m_prev.sizes());
  return torch::maximum(m_temp, m_prev);
}

torch::Tensor compose_region(const torch::Tensor& i_in, const torch::Tensor& i_temp,
                             const torch::Tensor& m) {
  TORCH_CHECK(i_in.sizes() == i_temp.sizes(), "compose_region: image shape mismatch, ",
              i_in.sizes(), " vs ", i_temp.sizes());
  check_same_spatial(i_in, m, "compose_region");
  return i_in * (1.0 - m) + i_temp * m;
}

std::pair<torch::Tensor, torch::Tensor> adaptive_fuse(const std::vector<IterationState>& states,
                                                      const torch::Tensor& i_in, double epsilon,
                                                      bool clamp) {
  TORCH_CHECK(!states.empty(), "adaptive_fuse: empty state list");
  TORCH_CHECK(epsilon > 0, "adaptive_fuse: epsilon must be > 0");
  const double n = static_cast<double>(states.size());
  torch::Tensor mask_sum = states[0].mask;
  torch::Tensor weighted_sum = states[0].removed * states[0].mask;
  for (size_t i = 1; i < states.size(); ++i) {
    check_same_spatial(states[i].mask, i_in, "adaptive_fuse");
    mask_sum = mask_sum + states[i].mask;
    weighted_sum = weighted_sum + states[i].removed * states[i].mask;
  }
  auto mean_mask = mask_sum / n;
  auto smoothed = (weighted_sum / n + epsilon) / (mean_mask + epsilon);
  auto fused = i_in * (1.0 - mean_mask) + smoothed * mean_mask;
  if (clamp) fused = torch::clamp(fused, 0.0, 1.0);
  return {fused, mean_mask};
}

torch::Tensor upsample_quarter(const torch::Tensor& x) {
  auto opts = [](int64_t h, int64_t w) {
    return F::InterpolateFuncOptions()
        .size(std::vector<int64_t>{h, w})
        .mode(torch::kBilinear)
        .align_corners(false);
  };
  auto half = F::interpolate(x, opts(x.size(2) * 2, x.size(3) * 2));
  return F::interpolate(half, opts(x.size(2) * 4, x.size(3) * 4));
}

torch::Tensor downsample_quarter(const torch::Tensor& x) {
  TORCH_CHECK(x.size(2) % 4 == 0 && x.size(3) % 4 == 0,
              "downsample_quarter: spatial size must be divisible by 4, got ", x.sizes());
  return torch::avg_pool2d(x, /*kernel_size=*/{4, 4}, /*stride=*/{4, 4});
}

}  // namespace psstr

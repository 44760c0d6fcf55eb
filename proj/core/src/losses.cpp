#include "psstr/losses.hpp"

#include "psstr/ops.hpp"

namespace psstr {

namespace {

constexpr double kDiceSmoothing = 1e-6;

void check_binary(const torch::Tensor& m, const char* what) {
  TORCH_CHECK((m.eq(0.0) | m.eq(1.0)).all().item<bool>(), what,
              ": ground-truth mask must be binary");
}

// feats_out hold the taps of cat(outs, 0); slice i of each tap belongs to
// iteration i.
torch::Tensor perceptual_from_features(const std::vector<torch::Tensor>& feats_out,
                                       const std::vector<torch::Tensor>& feats_gt,
                                       size_t iterations, int64_t b,
                                       const torch::TensorOptions& opts) {
  auto loss = torch::zeros({}, opts);
  for (size_t n = 0; n < feats_out.size(); ++n) {
    for (size_t i = 0; i < iterations; ++i) {
      auto f = feats_out[n].narrow(0, static_cast<int64_t>(i) * b, b);
      loss = loss + (f - feats_gt[n]).abs().mean();
    }
  }
  return loss;
}

torch::Tensor style_from_features(const std::vector<torch::Tensor>& feats_out,
                                  const std::vector<torch::Tensor>& feats_gt, size_t iterations,
                                  int64_t b, const torch::TensorOptions& opts) {
  auto loss = torch::zeros({}, opts);
  for (size_t n = 0; n < feats_out.size(); ++n) {
    auto gt_gram = gram(feats_gt[n]);
    for (size_t i = 0; i < iterations; ++i) {
      auto f = feats_out[n].narrow(0, static_cast<int64_t>(i) * b, b);
      loss = loss + (gram(f) - gt_gram).abs().mean();
    }
  }
  return loss;
}

}  // namespace

torch::Tensor region_content_loss(const std::vector<torch::Tensor>& outs,
                                  const torch::Tensor& gt, const torch::Tensor& m_gt,
                                  const LossWeights& w) {
  TORCH_CHECK(!outs.empty(), "region_content_loss: no iteration outputs");
  check_binary(m_gt, "region_content_loss");
  check_same_spatial(gt, m_gt, "region_content_loss");
  auto loss = torch::zeros({}, gt.options());
  for (const auto& out : outs) {
    TORCH_CHECK(out.sizes() == gt.sizes(), "region_content_loss: shape mismatch, ", out.sizes(),
                " vs ", gt.sizes());
    auto diff = out - gt;
    loss = loss + w.gamma_text * (m_gt * diff).abs().mean() +
           w.gamma_background * ((1.0 - m_gt) * diff).abs().mean();
  }
  return loss;
}

torch::Tensor perceptual_loss(const std::vector<torch::Tensor>& outs, const torch::Tensor& gt,
                              const FeatureBackbone& backbone) {
  TORCH_CHECK(!outs.empty(), "perceptual_loss: no iteration outputs");
  auto out_feats = backbone.features(torch::cat(outs, 0));
  auto gt_feats = backbone.features(gt);
  return perceptual_from_features(out_feats, gt_feats, outs.size(), gt.size(0), gt.options());
}

torch::Tensor gram(const torch::Tensor& f) {
  TORCH_CHECK(f.dim() == 4, "gram: expected (b,C,h,w), got ", f.sizes());
  const auto b = f.size(0), c = f.size(1), h = f.size(2), w = f.size(3);
  auto x = f.reshape({b, c, h * w});
  return torch::bmm(x, x.transpose(1, 2)) / static_cast<double>(c * h * w);
}

torch::Tensor style_loss(const std::vector<torch::Tensor>& outs, const torch::Tensor& gt,
                         const FeatureBackbone& backbone) {
  TORCH_CHECK(!outs.empty(), "style_loss: no iteration outputs");
  auto out_feats = backbone.features(torch::cat(outs, 0));
  auto gt_feats = backbone.features(gt);
  return style_from_features(out_feats, gt_feats, outs.size(), gt.size(0), gt.options());
}

torch::Tensor dice_segmentation_loss(const std::vector<torch::Tensor>& masks,
                                     const torch::Tensor& m_gt, const LossWeights& w) {
  TORCH_CHECK(!masks.empty(), "dice_segmentation_loss: no masks");
  TORCH_CHECK(masks.size() == w.gamma_seg.size(),
              "dice_segmentation_loss: gamma_seg size must match the iteration count");
  check_binary(m_gt, "dice_segmentation_loss");
  auto gt_flat = m_gt.flatten(1);
  auto gt_sq = (gt_flat * gt_flat).sum(1);
  auto loss = torch::zeros({}, m_gt.options());
  for (size_t i = 0; i < masks.size(); ++i) {
    TORCH_CHECK(masks[i].sizes() == m_gt.sizes(), "dice_segmentation_loss: shape mismatch, ",
                masks[i].sizes(), " vs ", m_gt.sizes());
    auto m = masks[i].flatten(1);
    auto inter = (m * gt_flat).sum(1);
    auto denom = (m * m).sum(1) + gt_sq;
    auto dice = (2.0 * inter + kDiceSmoothing) / (denom + kDiceSmoothing);
    loss = loss + w.gamma_seg[i] * (1.0 - dice).mean();
  }
  return loss;
}

LossBreakdown total_loss(const std::vector<torch::Tensor>& outs,
                         const std::vector<torch::Tensor>& masks, const torch::Tensor& gt,
                         const torch::Tensor& m_gt, const FeatureBackbone& backbone,
                         const LossWeights& w) {
  TORCH_CHECK(!outs.empty() && outs.size() == masks.size(),
              "total_loss: outputs and masks must pair up per iteration");
  LossBreakdown b;
  b.rc = region_content_loss(outs, gt, m_gt, w);
  // The two backbone losses share one feature extraction; the ground truth
  // needs no gradients.
  auto out_feats = backbone.features(torch::cat(outs, 0));
  std::vector<torch::Tensor> gt_feats;
  {
    torch::NoGradGuard no_grad;
    gt_feats = backbone.features(gt);
  }
  b.perceptual =
      perceptual_from_features(out_feats, gt_feats, outs.size(), gt.size(0), gt.options());
  b.style = style_from_features(out_feats, gt_feats, outs.size(), gt.size(0), gt.options());
  b.seg = dice_segmentation_loss(masks, m_gt, w);
  b.total = w.w_style * b.style + w.w_perceptual * b.perceptual + b.rc + b.seg;
  return b;
}

}  // namespace psstr

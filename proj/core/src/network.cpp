#include "psstr/network.hpp"

namespace F = torch::nn::functional;

namespace psstr {

namespace {

torch::Tensor upsample2x(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{x.size(2) * 2, x.size(3) * 2})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

PSSTRNetImpl::PSSTRNetImpl(PSSTRNetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto ch = cfg_.stage_channels();
  const int64_t kernels[5] = {7, 5, 3, 3, 3};
  const int64_t strides[5] = {1, 2, 2, 1, 1};

  // shared encoder, input = (i_in, previous result, previous mask) = 7 channels
  int64_t in_ch = 7;
  for (int i = 0; i < 5; ++i) {
    enc_stages.push_back(register_module("enc" + std::to_string(i + 1),
                                         ConvStage(in_ch, ch[i], kernels[i], strides[i])));
    in_ch = ch[i];
  }

  // removal decoder: deep to shallow with encoder skips
  dec_stages.push_back(register_module("dec5", ConvStage(ch[4], ch[4], 3, 1)));
  dec_stages.push_back(register_module("dec4", ConvStage(ch[4] + ch[3], ch[3], 3, 1)));
  dec_stages.push_back(register_module("dec3", ConvStage(ch[3] + ch[2], ch[2], 3, 1)));
  dec_stages.push_back(register_module("dec2", ConvStage(ch[2] + ch[1], ch[1], 3, 1)));
  dec_stages.push_back(register_module("dec1", ConvStage(ch[1] + ch[0], ch[0], 3, 1)));
  dec_out = register_module(
      "dec_out", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch[0], 3, 3).padding(1)));

  // segmentation branch
  trpm = register_module("trpm", Trpm(ch[4]));
  correction = register_module("correction", MaskCorrection(ch[4], cfg_.ce_dilations));
}

std::vector<torch::Tensor> PSSTRNetImpl::encode(const torch::Tensor& stack) {
  TORCH_CHECK(stack.defined() && stack.dim() == 4 && stack.size(1) == 7,
              "encode: expected a (b,7,H,W) stack, got ",
              stack.defined() ? stack.sizes() : torch::IntArrayRef{});
  TORCH_CHECK(stack.size(2) % 4 == 0 && stack.size(3) % 4 == 0,
              "encode: H and W must be divisible by 4, got ", stack.size(2), "x", stack.size(3));
  std::vector<torch::Tensor> features;
  features.reserve(5);
  torch::Tensor x = stack;
  for (auto& stage : enc_stages) {
    x = stage->forward(x);
    features.push_back(x);
  }
  return features;
}

std::pair<torch::Tensor, torch::Tensor> PSSTRNetImpl::segment_text_with_feature(
    const std::vector<torch::Tensor>& features) {
  TORCH_CHECK(features.size() == 5, "segment_text: expected 5 encoder features");
  auto [z0, mask_quarter] = trpm->forward(features.back());
  return {upsample_quarter(mask_quarter), z0};
}

torch::Tensor PSSTRNetImpl::segment_text(const std::vector<torch::Tensor>& features) {
  return segment_text_with_feature(features).first;
}

torch::Tensor PSSTRNetImpl::correct_mask(const torch::Tensor& m_comp, const torch::Tensor& z0) {
  check_same_spatial(downsample_quarter(m_comp), z0, "correct_mask");
  auto corrected = correction->forward(downsample_quarter(m_comp), z0);
  return upsample_quarter(corrected);
}

torch::Tensor PSSTRNetImpl::remove_text(const std::vector<torch::Tensor>& features) {
  TORCH_CHECK(features.size() == 5, "remove_text: expected 5 encoder features");
  auto x = dec_stages[0]->forward(features[4]);
  x = dec_stages[1]->forward(torch::cat({x, features[3]}, 1));
  x = dec_stages[2]->forward(torch::cat({x, features[2]}, 1));
  x = upsample2x(x);
  x = dec_stages[3]->forward(torch::cat({x, features[1]}, 1));
  x = upsample2x(x);
  x = dec_stages[4]->forward(torch::cat({x, features[0]}, 1));
  return torch::sigmoid(dec_out->forward(x));
}

IterationState PSSTRNetImpl::initial_state(const torch::Tensor& i_in) const {
  IterationState s;
  s.index = 0;
  s.removed = i_in;
  s.mask = torch::zeros({i_in.size(0), 1, i_in.size(2), i_in.size(3)}, i_in.options());
  return s;
}

IterationState PSSTRNetImpl::run_iteration(const IterationState& prev, const torch::Tensor& i_in) {
  TORCH_CHECK(prev.removed.defined() && prev.mask.defined(),
              "run_iteration: previous state is uninitialized");
  auto stack = torch::cat({i_in, prev.removed, prev.mask}, 1);
  auto features = encode(stack);
  auto [m_temp, z0] = segment_text_with_feature(features);
  auto m_comp = merge_masks(m_temp, prev.mask);
  auto mask = correct_mask(m_comp, z0);
  auto i_temp = remove_text(features);
  IterationState next;
  next.index = prev.index + 1;
  next.removed = compose_region(i_in, i_temp, mask);
  next.mask = mask;
  next.mask_raw = m_temp;
  next.mask_merged = m_comp;
  return next;
}

ForwardResult PSSTRNetImpl::forward(const torch::Tensor& i_in) {
  check_image(i_in, "forward input");
  ForwardResult result;
  result.states.reserve(cfg_.iterations);
  IterationState state = initial_state(i_in);
  for (int64_t i = 0; i < cfg_.iterations; ++i) {
    state = run_iteration(state, i_in);
    result.states.push_back(state);
  }
  std::tie(result.output, result.fused_mask) = adaptive_fuse(result.states, i_in, cfg_.epsilon);
  return result;
}

int64_t PSSTRNetImpl::parameter_count() const {
  int64_t total = 0;
  for (const auto& p : parameters()) total += p.numel();
  return total;
}

}  // namespace psstr

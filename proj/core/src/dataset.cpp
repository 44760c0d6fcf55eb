#include "psstr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "psstr/image_io.hpp"

namespace F = torch::nn::functional;

namespace psstr {

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  // splitmix64 over the combined words
  uint64_t x = a;
  auto mix = [](uint64_t v) {
    v += 0x9e3779b97f4a7c15ULL;
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
  };
  x = mix(x ^ mix(b));
  x = mix(x ^ mix(c));
  return x;
}

torch::Tensor derive_mask(const torch::Tensor& input, const torch::Tensor& gt, double threshold,
                          int64_t dilate_radius) {
  TORCH_CHECK(input.sizes() == gt.sizes(), "derive_mask: shape mismatch, ", input.sizes(),
              " vs ", gt.sizes());
  const bool batched = input.dim() == 4;
  auto a = batched ? input : input.unsqueeze(0);
  auto b = batched ? gt : gt.unsqueeze(0);
  auto mask = std::get<0>((a - b).abs().max(/*dim=*/1, /*keepdim=*/true))
                  .gt(threshold)
                  .to(a.dtype());
  if (dilate_radius > 0) {
    const int64_t k = 2 * dilate_radius + 1;
    mask = torch::max_pool2d(mask, {k, k}, {1, 1}, {dilate_radius, dilate_radius});
  }
  return batched ? mask : mask.squeeze(0);
}

namespace {

torch::Tensor resize_bilinear(const torch::Tensor& t, int64_t h, int64_t w) {
  if (t.size(1) == h && t.size(2) == w) return t;
  return F::interpolate(t.unsqueeze(0), F::InterpolateFuncOptions()
                                            .size(std::vector<int64_t>{h, w})
                                            .mode(torch::kBilinear)
                                            .align_corners(false))
      .squeeze(0);
}

std::map<std::string, std::filesystem::path> index_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> by_stem;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path()))
        by_stem[entry.path().stem().string()] = entry.path();
    }
  }
  return by_stem;
}

}  // namespace

LoadResult load_pairs(const std::filesystem::path& root, const std::string& split,
                      const PairLoaderOptions& opts) {
  LoadResult result;
  const auto base = root / split;
  auto inputs = index_dir(base / opts.input_subdir);
  auto gts = index_dir(base / opts.gt_subdir);
  auto masks = index_dir(base / opts.mask_subdir);

  for (const auto& [stem, input_path] : inputs) {
    auto git = gts.find(stem);
    if (git == gts.end()) {
      result.errors.push_back(stem + ": no ground-truth counterpart");
      continue;
    }
    try {
      Sample s;
      s.name = stem;
      s.input = resize_bilinear(load_image(input_path), opts.size[0], opts.size[1]);
      s.gt = resize_bilinear(load_image(git->second), opts.size[0], opts.size[1]);
      auto mit = masks.find(stem);
      if (mit != masks.end()) {
        auto m = resize_bilinear(load_image(mit->second), opts.size[0], opts.size[1]);
        s.mask_gt = m.narrow(0, 0, 1).ge(0.5).to(torch::kFloat32);
      } else {
        s.mask_gt = derive_mask(s.input, s.gt, opts.mask_threshold, opts.dilate_radius);
      }
      result.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      result.errors.push_back(stem + ": " + e.what());
    }
  }
  for (const auto& [stem, path] : gts) {
    if (!inputs.count(stem)) result.errors.push_back(stem + ": no input counterpart");
  }
  if (result.samples.empty())
    result.errors.push_back("warning: no samples found under " + base.string());
  return result;
}

Sample hflip(const Sample& s) {
  Sample out;
  out.name = s.name;
  out.input = torch::flip(s.input, {-1});
  out.gt = torch::flip(s.gt, {-1});
  out.mask_gt = torch::flip(s.mask_gt, {-1});
  return out;
}

namespace {

torch::Tensor rotate_tensor(const torch::Tensor& t, double radians) {
  const int64_t h = t.size(1), w = t.size(2);
  const double c = std::cos(radians), s = std::sin(radians);
  // Pixel-space rotation about the image center expressed in the normalized
  // coordinates grid_sample uses (aspect-corrected).
  auto theta = torch::tensor({{c, -s * static_cast<double>(h) / static_cast<double>(w), 0.0},
                              {s * static_cast<double>(w) / static_cast<double>(h), c, 0.0}},
                             torch::kFloat32)
                   .unsqueeze(0);
  auto grid = F::affine_grid(theta, {1, t.size(0), h, w}, /*align_corners=*/false);
  return F::grid_sample(t.unsqueeze(0), grid,
                        F::GridSampleFuncOptions()
                            .mode(torch::kBilinear)
                            .padding_mode(torch::kZeros)
                            .align_corners(false))
      .squeeze(0);
}

}  // namespace

Sample rotate(const Sample& s, double degrees) {
  const double rad = degrees * M_PI / 180.0;
  Sample out;
  out.name = s.name;
  out.input = rotate_tensor(s.input, rad);
  out.gt = rotate_tensor(s.gt, rad);
  out.mask_gt = rotate_tensor(s.mask_gt, rad).ge(0.5).to(torch::kFloat32);
  return out;
}

Sample augment(const Sample& s, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-10.0, 10.0);
  const bool flip = unit(rng) < 0.5;
  const double degrees = angle(rng);
  Sample out = flip ? hflip(s) : s;
  return rotate(out, degrees);
}

Batch stack_samples(const std::vector<Sample>& samples, int64_t begin, int64_t count) {
  TORCH_CHECK(begin >= 0 && count >= 1 &&
                  begin + count <= static_cast<int64_t>(samples.size()),
              "stack_samples: range [", begin, ", ", begin + count, ") out of bounds");
  std::vector<torch::Tensor> in, gt, mask;
  in.reserve(count);
  gt.reserve(count);
  mask.reserve(count);
  for (int64_t i = begin; i < begin + count; ++i) {
    in.push_back(samples[static_cast<size_t>(i)].input);
    gt.push_back(samples[static_cast<size_t>(i)].gt);
    mask.push_back(samples[static_cast<size_t>(i)].mask_gt);
  }
  return {torch::stack(in), torch::stack(gt), torch::stack(mask)};
}

}  // namespace psstr

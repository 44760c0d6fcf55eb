#include "psstr/backbone.hpp"

#include <stdexcept>

#include "psstr/checkpoint.hpp"

namespace psstr {

using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;

namespace {
// ImageNet channel statistics, the convention the extractor was defined with.
const float kMean[3] = {0.485f, 0.456f, 0.406f};
const float kStd[3] = {0.229f, 0.224f, 0.225f};
}  // namespace

// VGG-16 feature stack through relu5_1. Layers past the last tap are omitted.
struct Vgg16FeaturesImpl : torch::nn::Module {
  Vgg16FeaturesImpl() {
    auto add = [&](const char* name, int64_t in, int64_t out) {
      auto conv = Conv2d(Conv2dOptions(in, out, 3).padding(1));
      convs.push_back(register_module(name, conv));
    };
    add("conv1_1", 3, 64);
    add("conv1_2", 64, 64);
    add("conv2_1", 64, 128);
    add("conv2_2", 128, 128);
    add("conv3_1", 128, 256);
    add("conv3_2", 256, 256);
    add("conv3_3", 256, 256);
    add("conv4_1", 256, 512);
    add("conv4_2", 512, 512);
    add("conv4_3", 512, 512);
    add("conv5_1", 512, 512);
  }

  // Taps after the first ReLU of each block.
  std::vector<torch::Tensor> forward(const torch::Tensor& x0) {
    std::vector<torch::Tensor> taps;
    taps.reserve(5);
    auto relu_conv = [&](size_t i, const torch::Tensor& x) {
      return torch::relu(convs[i]->forward(x));
    };
    auto pool = [](const torch::Tensor& x) { return torch::max_pool2d(x, 2, 2); };

    auto x = relu_conv(0, x0);
    taps.push_back(x);                 // relu1_1
    x = pool(relu_conv(1, x));
    x = relu_conv(2, x);
    taps.push_back(x);                 // relu2_1
    x = pool(relu_conv(3, x));
    x = relu_conv(4, x);
    taps.push_back(x);                 // relu3_1
    x = pool(relu_conv(6, relu_conv(5, x)));
    x = relu_conv(7, x);
    taps.push_back(x);                 // relu4_1
    x = pool(relu_conv(9, relu_conv(8, x)));
    x = relu_conv(10, x);
    taps.push_back(x);                 // relu5_1
    return taps;
  }

  std::vector<Conv2d> convs;
};

Vgg16Backbone::Vgg16Backbone() : layers_(std::make_shared<Vgg16FeaturesImpl>()) {
  for (auto& p : layers_->parameters()) p.requires_grad_(false);
  layers_->eval();
}

Vgg16Backbone Vgg16Backbone::random(uint64_t seed) {
  // Scoped seeding: the global RNG stream is restored afterwards.
  at::Generator gen = at::globalContext().defaultGenerator(at::kCPU);
  auto saved = gen.get_state();
  torch::manual_seed(seed);
  Vgg16Backbone backbone;
  gen.set_state(saved);
  return backbone;
}

Vgg16Backbone Vgg16Backbone::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw std::runtime_error("backbone weights not found: " + path.string());
  Archive archive = load_archive(path);
  Vgg16Backbone backbone;
  try {
    load_state_into(*backbone.layers_, archive.tensors);
  } catch (const std::exception& e) {
    throw std::runtime_error("backbone archive " + path.string() +
                             " is not a VGG-16 feature stack: " + e.what());
  }
  return backbone;
}

void Vgg16Backbone::save(const std::filesystem::path& path) const {
  nlohmann::json config{{"backbone", "vgg16"}, {"taps", {"relu1_1", "relu2_1", "relu3_1", "relu4_1", "relu5_1"}}};
  save_archive(path, named_state_of(*layers_), config);
}

std::vector<torch::Tensor> Vgg16Backbone::features(const torch::Tensor& images) const {
  TORCH_CHECK(images.dim() == 4 && images.size(1) == 3,
              "backbone: expected (b,3,H,W) input, got ", images.sizes());
  auto mean = torch::tensor({kMean[0], kMean[1], kMean[2]}, images.options()).view({1, 3, 1, 1});
  auto std = torch::tensor({kStd[0], kStd[1], kStd[2]}, images.options()).view({1, 3, 1, 1});
  return layers_->forward((images - mean) / std);
}

int64_t Vgg16Backbone::parameter_count() const {
  int64_t total = 0;
  for (const auto& p : layers_->parameters()) total += p.numel();
  return total;
}

void Vgg16Backbone::to(torch::Dtype dtype) { layers_->to(dtype); }

}  // namespace psstr

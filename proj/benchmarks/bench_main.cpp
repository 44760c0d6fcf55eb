#include <benchmark/benchmark.h>

#include <psstr/losses.hpp>
#include <psstr/metrics.hpp>
#include <psstr/network.hpp>
#include <psstr/synth.hpp>

using namespace psstr;

namespace {

void BM_forward(benchmark::State& state) {
  torch::manual_seed(1);
  PSSTRNetConfig cfg;
  cfg.iterations = state.range(0);
  PSSTRNet net{cfg};
  net->eval();
  torch::NoGradGuard ng;
  auto x = torch::rand({1, 3, 256, 256});
  for (auto _ : state) {
    auto result = net->forward(x);
    benchmark::DoNotOptimize(result.output.data_ptr());
  }
}
BENCHMARK(BM_forward)->Arg(1)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_train_step(benchmark::State& state) {
  torch::manual_seed(2);
  PSSTRNetConfig cfg;
  cfg.input_size = {64, 64};
  PSSTRNet net{cfg};
  net->train();
  auto backbone = Vgg16Backbone::random(3);
  auto w = LossWeights::for_iterations(cfg.iterations);
  std::vector<torch::Tensor> params;
  for (auto& p : net->parameters()) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(1e-3));
  auto x = torch::rand({6, 3, 64, 64});
  auto gt = torch::rand({6, 3, 64, 64});
  auto m_gt = torch::rand({6, 1, 64, 64}).ge(0.9).to(torch::kFloat32);
  for (auto _ : state) {
    opt.zero_grad();
    auto result = net->forward(x);
    std::vector<torch::Tensor> outs, masks;
    for (const auto& s : result.states) {
      outs.push_back(s.removed);
      masks.push_back(s.mask);
    }
    auto loss = total_loss(outs, masks, gt, m_gt, *&backbone, w);
    loss.total.backward();
    opt.step();
    benchmark::DoNotOptimize(loss.total.item<double>());
  }
}
BENCHMARK(BM_train_step)->Unit(benchmark::kMillisecond)->MinTime(10.0);

void BM_mssim(benchmark::State& state) {
  torch::manual_seed(4);
  const int64_t n = state.range(0);
  auto a = torch::rand({3, n, n});
  auto b = torch::rand({3, n, n});
  for (auto _ : state) benchmark::DoNotOptimize(mssim(a, b));
}
BENCHMARK(BM_mssim)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_metric_suite(benchmark::State& state) {
  torch::manual_seed(5);
  auto a = torch::rand({3, 256, 256});
  auto b = torch::rand({3, 256, 256});
  for (auto _ : state) {
    auto r = compute_metrics(a, b);
    benchmark::DoNotOptimize(r.psnr);
  }
}
BENCHMARK(BM_metric_suite)->Unit(benchmark::kMillisecond);

void BM_adaptive_fuse(benchmark::State& state) {
  torch::manual_seed(6);
  std::vector<IterationState> states(3);
  for (int i = 0; i < 3; ++i) {
    states[i].index = i + 1;
    states[i].removed = torch::rand({6, 3, 256, 256});
    states[i].mask = torch::rand({6, 1, 256, 256});
  }
  auto i_in = torch::rand({6, 3, 256, 256});
  for (auto _ : state) {
    auto [fused, mask] = adaptive_fuse(states, i_in, 1e-8);
    benchmark::DoNotOptimize(fused.data_ptr());
  }
}
BENCHMARK(BM_adaptive_fuse)->Unit(benchmark::kMillisecond);

void BM_synth_sample(benchmark::State& state) {
  SynthConfig cfg;
  cfg.image_size = {64, 64};
  int64_t i = 0;
  for (auto _ : state) {
    auto s = synth_sample(cfg, i++ % 1000);
    benchmark::DoNotOptimize(s.input.data_ptr());
  }
}
BENCHMARK(BM_synth_sample)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include <doctest.h>

#include <psstr/ops.hpp>

using namespace psstr;

namespace {

// Definition-level loops, independent of the tensor implementations.

torch::Tensor loop_max(const torch::Tensor& a, const torch::Tensor& b) {
  auto out = torch::empty_like(a);
  auto fa = a.flatten(), fb = b.flatten(), fo = out.flatten();
  for (int64_t i = 0; i < fa.numel(); ++i) {
    const float x = fa[i].item<float>(), y = fb[i].item<float>();
    fo[i] = x > y ? x : y;
  }
  return fo.reshape(a.sizes());
}

torch::Tensor loop_compose(const torch::Tensor& i_in, const torch::Tensor& i_temp,
                           const torch::Tensor& m) {
  auto out = torch::empty_like(i_in);
  for (int64_t b = 0; b < i_in.size(0); ++b)
    for (int64_t c = 0; c < i_in.size(1); ++c)
      for (int64_t y = 0; y < i_in.size(2); ++y)
        for (int64_t x = 0; x < i_in.size(3); ++x) {
          const float mi = m[b][0][y][x].item<float>();
          const float one_minus = 1.0f - mi;
          const float p1 = i_in[b][c][y][x].item<float>() * one_minus;
          const float p2 = i_temp[b][c][y][x].item<float>() * mi;
          out[b][c][y][x] = p1 + p2;
        }
  return out;
}

// Eq. 4 evaluated per pixel in double precision.
std::pair<torch::Tensor, torch::Tensor> loop_fuse(const std::vector<IterationState>& states,
                                                  const torch::Tensor& i_in, double eps) {
  const double n = static_cast<double>(states.size());
  auto fused = torch::empty_like(i_in, torch::kFloat64);
  auto mask = torch::empty({i_in.size(0), 1, i_in.size(2), i_in.size(3)}, torch::kFloat64);
  for (int64_t b = 0; b < i_in.size(0); ++b)
    for (int64_t y = 0; y < i_in.size(2); ++y)
      for (int64_t x = 0; x < i_in.size(3); ++x) {
        double msum = 0;
        for (const auto& s : states) msum += s.mask[b][0][y][x].item<double>();
        const double mprime = msum / n;
        mask[b][0][y][x] = mprime;
        for (int64_t c = 0; c < i_in.size(1); ++c) {
          double wsum = 0;
          for (const auto& s : states)
            wsum += s.removed[b][c][y][x].item<double>() * s.mask[b][0][y][x].item<double>();
          const double smoothed = (wsum / n + eps) / (mprime + eps);
          fused[b][c][y][x] =
              i_in[b][c][y][x].item<double>() * (1.0 - mprime) + smoothed * mprime;
        }
      }
  return {fused, mask};
}

std::vector<IterationState> random_states(int64_t n, int64_t b, int64_t h, int64_t w) {
  std::vector<IterationState> states;
  for (int64_t i = 0; i < n; ++i) {
    IterationState s;
    s.index = i + 1;
    s.removed = torch::rand({b, 3, h, w});
    s.mask = torch::rand({b, 1, h, w});
    states.push_back(s);
  }
  return states;
}

}  // namespace

TEST_CASE("merge_masks is the elementwise maximum") {
  auto a = torch::full({1, 1, 1, 1}, 0.7f);
  auto b = torch::full({1, 1, 1, 1}, 0.2f);
  CHECK(merge_masks(a, b).item<float>() == 0.7f);

  torch::manual_seed(11);
  auto m_temp = torch::rand({2, 1, 4, 4});
  CHECK(torch::equal(merge_masks(m_temp, torch::zeros_like(m_temp)), m_temp));

  auto m_prev = torch::rand({2, 1, 4, 4});
  CHECK(torch::equal(merge_masks(m_temp, m_prev), loop_max(m_temp, m_prev)));
}

TEST_CASE("merge_masks monotonicity and idempotence") {
  torch::manual_seed(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = torch::rand({1, 1, 5, 7});
    auto b = torch::rand({1, 1, 5, 7});
    auto merged = merge_masks(a, b);
    CHECK(merged.ge(a).all().item<bool>());
    CHECK(merged.ge(b).all().item<bool>());
    CHECK(torch::equal(merge_masks(a, a), a));
  }
}

TEST_CASE("merge_masks rejects mismatched shapes") {
  CHECK_THROWS(merge_masks(torch::rand({1, 1, 4, 4}), torch::rand({1, 1, 4, 5})));
}

TEST_CASE("compose_region identities") {
  torch::manual_seed(13);
  auto i_in = torch::rand({2, 3, 4, 4});
  auto i_temp = torch::rand({2, 3, 4, 4});
  CHECK(torch::equal(compose_region(i_in, i_temp, torch::zeros({2, 1, 4, 4})), i_in));
  CHECK(torch::equal(compose_region(i_in, i_temp, torch::ones({2, 1, 4, 4})), i_temp));
}

TEST_CASE("compose_region matches the per-pixel blend exactly") {
  torch::manual_seed(14);
  auto i_in = torch::rand({1, 3, 4, 4});
  auto i_temp = torch::rand({1, 3, 4, 4});
  auto m = torch::rand({1, 1, 4, 4});
  CHECK(torch::equal(compose_region(i_in, i_temp, m), loop_compose(i_in, i_temp, m)));
}

TEST_CASE("compose_region stays between its operands") {
  torch::manual_seed(15);
  for (int trial = 0; trial < 10; ++trial) {
    auto i_in = torch::rand({1, 3, 6, 6});
    auto i_temp = torch::rand({1, 3, 6, 6});
    auto m = torch::rand({1, 1, 6, 6});
    auto out = compose_region(i_in, i_temp, m);
    auto lo = torch::minimum(i_in, i_temp);
    auto hi = torch::maximum(i_in, i_temp);
    CHECK(out.ge(lo - 1e-6).all().item<bool>());
    CHECK(out.le(hi + 1e-6).all().item<bool>());
  }
}

TEST_CASE("compose_region rejects mismatched shapes") {
  CHECK_THROWS(compose_region(torch::rand({1, 3, 4, 4}), torch::rand({1, 3, 4, 4}),
                              torch::rand({1, 1, 8, 8})));
}

TEST_CASE("adaptive_fuse single-iteration full mask") {
  torch::manual_seed(16);
  const double eps = 1e-8;
  std::vector<IterationState> states = random_states(1, 1, 4, 4);
  states[0].mask = torch::ones({1, 1, 4, 4});
  auto i_in = torch::rand({1, 3, 4, 4});
  auto [fused, mask] = adaptive_fuse(states, i_in, eps, /*clamp=*/false);
  CHECK(torch::equal(mask, torch::ones({1, 1, 4, 4})));
  // I' = (I + eps) / (1 + eps): deviation from I bounded by eps
  CHECK((fused - states[0].removed).abs().max().item<double>() <= eps + 1e-12);
}

TEST_CASE("adaptive_fuse zero masks return the input bit-exactly") {
  torch::manual_seed(17);
  auto states = random_states(3, 2, 4, 4);
  for (auto& s : states) s.mask = torch::zeros({2, 1, 4, 4});
  auto i_in = torch::rand({2, 3, 4, 4});
  auto [fused, mask] = adaptive_fuse(states, i_in, 1e-8);
  CHECK(torch::equal(fused, i_in));
  CHECK(mask.abs().max().item<double>() == 0.0);
}

TEST_CASE("adaptive_fuse matches the per-pixel oracle") {
  torch::manual_seed(18);
  auto states = random_states(3, 1, 4, 4);
  auto i_in = torch::rand({1, 3, 4, 4});
  auto [fused, mask] = adaptive_fuse(states, i_in, 1e-8, /*clamp=*/false);
  auto [oracle_fused, oracle_mask] = loop_fuse(states, i_in, 1e-8);
  CHECK((fused.to(torch::kFloat64) - oracle_fused).abs().max().item<double>() < 1e-6);
  CHECK((mask.to(torch::kFloat64) - oracle_mask).abs().max().item<double>() < 1e-7);
}

TEST_CASE("adaptive_fuse output is bounded before clamping") {
  torch::manual_seed(19);
  for (int trial = 0; trial < 20; ++trial) {
    auto states = random_states(1 + trial % 4, 1, 6, 6);
    auto i_in = torch::rand({1, 3, 6, 6});
    auto [fused, mask] = adaptive_fuse(states, i_in, 1e-8, /*clamp=*/false);
    CHECK(fused.min().item<double>() >= -1e-6);
    CHECK(fused.max().item<double>() <= 1.0 + 1e-6);
  }
}

TEST_CASE("adaptive_fuse rejects bad arguments") {
  std::vector<IterationState> empty;
  CHECK_THROWS(adaptive_fuse(empty, torch::rand({1, 3, 4, 4}), 1e-8));
  auto states = random_states(1, 1, 4, 4);
  CHECK_THROWS(adaptive_fuse(states, torch::rand({1, 3, 4, 4}), 0.0));
}

TEST_CASE("quarter-scale resampling helpers") {
  auto x = torch::rand({1, 1, 16, 16});
  CHECK(upsample_quarter(x).sizes() == torch::IntArrayRef({1, 1, 64, 64}));
  CHECK(downsample_quarter(x).sizes() == torch::IntArrayRef({1, 1, 4, 4}));
  // area average of a constant map is that constant
  auto c = torch::full({1, 1, 8, 8}, 0.25f);
  CHECK(torch::allclose(downsample_quarter(c), torch::full({1, 1, 2, 2}, 0.25f)));
}

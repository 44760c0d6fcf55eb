#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <psstr/dataset.hpp>
#include <psstr/image_io.hpp>
#include <psstr/synth.hpp>

using namespace psstr;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* tag) {
    path = std::filesystem::temp_directory_path() /
           (std::string("psstr_data_") + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

torch::Tensor loop_derive(const torch::Tensor& input, const torch::Tensor& gt, double thr,
                          int64_t r) {
  const int64_t h = input.size(1), w = input.size(2);
  auto raw = torch::zeros({1, h, w});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      float maxd = 0;
      for (int64_t c = 0; c < 3; ++c) {
        const float d = std::abs(input[c][y][x].item<float>() - gt[c][y][x].item<float>());
        maxd = std::max(maxd, d);
      }
      raw[0][y][x] = maxd > thr ? 1.0f : 0.0f;
    }
  auto out = torch::zeros_like(raw);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      float v = 0;
      for (int64_t dy = -r; dy <= r; ++dy)
        for (int64_t dx = -r; dx <= r; ++dx) {
          const int64_t yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w)
            v = std::max(v, raw[0][yy][xx].item<float>());
        }
      out[0][y][x] = v;
    }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("derive_mask: identity, dilation geometry, loop oracle") {
  torch::manual_seed(81);
  auto img = torch::rand({3, 8, 8});
  CHECK(derive_mask(img, img, 0.1, 3).abs().max().item<float>() == 0.0f);

  auto gt = torch::full({3, 8, 8}, 0.5f);
  auto input = gt.clone();
  input[0][4][4] = 1.0f;
  auto mask = derive_mask(input, gt, 0.1, 1);
  CHECK(mask.sum().item<float>() == 9.0f);  // 3x3 block
  CHECK(mask[0][4][4].item<float>() == 1.0f);
  CHECK(mask[0][3][3].item<float>() == 1.0f);
  CHECK(mask[0][2][2].item<float>() == 0.0f);

  auto a = torch::rand({3, 12, 12});
  auto b = torch::rand({3, 12, 12});
  CHECK(torch::equal(derive_mask(a, b, 0.3, 2), loop_derive(a, b, 0.3, 2)));
  // batched input keeps the batch dimension
  CHECK(derive_mask(a.unsqueeze(0), b.unsqueeze(0), 0.3, 2).sizes() ==
        torch::IntArrayRef({1, 1, 12, 12}));
}

TEST_CASE("load_pairs: empty, single pair, ordering, mask dir, errors") {
  TempDir tmp("pairs");
  PairLoaderOptions opts;
  opts.size = {16, 16};

  auto empty = load_pairs(tmp.path, "train", opts);
  CHECK(empty.samples.empty());
  REQUIRE(!empty.errors.empty());
  CHECK(empty.errors.back().find("warning") != std::string::npos);

  const auto base = tmp.path / "train";
  std::filesystem::create_directories(base / "input");
  std::filesystem::create_directories(base / "gt");
  torch::manual_seed(82);
  auto img_b = torch::rand({3, 16, 16});
  auto img_a = torch::rand({3, 16, 16});
  save_image(base / "input" / "b.png", img_b);
  save_image(base / "gt" / "b.png", img_b);
  auto one = load_pairs(tmp.path, "train", opts);
  REQUIRE(one.samples.size() == 1);
  CHECK(one.samples[0].name == "b");
  CHECK(one.samples[0].mask_gt.abs().max().item<float>() == 0.0f);  // derived, identical pair

  save_image(base / "input" / "a.png", img_a);
  save_image(base / "gt" / "a.png", img_a);
  auto two = load_pairs(tmp.path, "train", opts);
  REQUIRE(two.samples.size() == 2);
  CHECK(two.samples[0].name == "a");  // lexicographic
  CHECK(two.samples[1].name == "b");

  // an explicit mask file wins over subtraction
  std::filesystem::create_directories(base / "mask");
  auto mask = torch::zeros({1, 16, 16});
  mask[0][3][3] = 1.0f;
  save_image(base / "mask" / "a.png", mask);
  auto with_mask = load_pairs(tmp.path, "train", opts);
  CHECK(torch::equal(with_mask.samples[0].mask_gt, mask));

  // unmatched input produces an error entry but loading continues
  save_image(base / "input" / "z.png", img_a);
  auto partial = load_pairs(tmp.path, "train", opts);
  CHECK(partial.samples.size() == 2);
  bool mentioned = false;
  for (const auto& e : partial.errors) mentioned |= e.find("z") != std::string::npos;
  CHECK(mentioned);
}

TEST_CASE("load_pairs resizes to the configured input size") {
  TempDir tmp("resize");
  const auto base = tmp.path / "train";
  std::filesystem::create_directories(base / "input");
  std::filesystem::create_directories(base / "gt");
  torch::manual_seed(83);
  auto img = torch::rand({3, 32, 48});
  save_image(base / "input" / "x.png", img);
  save_image(base / "gt" / "x.png", img);
  PairLoaderOptions opts;
  opts.size = {16, 16};
  auto loaded = load_pairs(tmp.path, "train", opts);
  REQUIRE(loaded.samples.size() == 1);
  CHECK(loaded.samples[0].input.sizes() == torch::IntArrayRef({3, 16, 16}));
  CHECK(loaded.samples[0].gt.sizes() == torch::IntArrayRef({3, 16, 16}));
  CHECK(loaded.samples[0].mask_gt.sizes() == torch::IntArrayRef({1, 16, 16}));
}

TEST_CASE("augmentation: determinism, involution, binary masks") {
  torch::manual_seed(84);
  Sample s;
  s.name = "t";
  s.input = torch::rand({3, 16, 16});
  s.gt = torch::rand({3, 16, 16});
  s.mask_gt = torch::rand({1, 16, 16}).ge(0.5).to(torch::kFloat32);

  auto a1 = augment(s, 12345);
  auto a2 = augment(s, 12345);
  CHECK(torch::equal(a1.input, a2.input));
  CHECK(torch::equal(a1.gt, a2.gt));
  CHECK(torch::equal(a1.mask_gt, a2.mask_gt));
  CHECK(!torch::equal(augment(s, 54321).input, a1.input));

  auto flipped_twice = hflip(hflip(s));
  CHECK(torch::equal(flipped_twice.input, s.input));
  CHECK(torch::equal(flipped_twice.gt, s.gt));
  CHECK(torch::equal(flipped_twice.mask_gt, s.mask_gt));

  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto out = augment(s, seed);
    auto unique = ((out.mask_gt.ne(0.0)) & (out.mask_gt.ne(1.0))).any().item<bool>();
    CHECK(!unique);
    CHECK(out.input.sizes() == s.input.sizes());
  }
}

TEST_CASE("synthetic dataset: counts, determinism, self-consistency") {
  TempDir tmp("synth");
  SynthConfig cfg;
  cfg.count = 10;
  cfg.image_size = {64, 64};
  cfg.seed = 5;
  synth_toy_dataset(tmp.path / "d1", cfg);
  for (const char* sub : {"input", "gt", "mask"}) {
    int64_t files = 0;
    for ([[maybe_unused]] const auto& e :
         std::filesystem::directory_iterator(tmp.path / "d1" / "train" / sub))
      ++files;
    CHECK(files == 10);
  }

  synth_toy_dataset(tmp.path / "d2", cfg);
  for (int i = 0; i < 10; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "%06d.png", i);
    for (const char* sub : {"input", "gt", "mask"}) {
      CHECK(slurp(tmp.path / "d1" / "train" / sub / name) ==
            slurp(tmp.path / "d2" / "train" / sub / name));
    }
  }

  // a different seed changes the bytes
  SynthConfig other = cfg;
  other.seed = 6;
  synth_toy_dataset(tmp.path / "d3", other);
  CHECK(slurp(tmp.path / "d1" / "train" / "input" / "000000.png") !=
        slurp(tmp.path / "d3" / "train" / "input" / "000000.png"));

  PairLoaderOptions opts;
  opts.size = {64, 64};
  auto loaded = load_pairs(tmp.path / "d1", "train", opts);
  REQUIRE(loaded.samples.size() == 10);
  for (const auto& s : loaded.samples) {
    // pixels outside the recorded mask are identical between input and gt
    auto outside = 1.0 - s.mask_gt;
    CHECK(((s.input - s.gt).abs() * outside).max().item<float>() == 0.0f);
    CHECK(s.mask_gt.sum().item<float>() > 0.0f);

    // subtraction with the spec threshold recovers the recorded mask
    auto derived = derive_mask(s.input, s.gt, 25.0 / 255.0, 0);
    CHECK(derived.ge(s.mask_gt).all().item<bool>());  // containment
    const double inter = (derived * s.mask_gt).sum().item<double>();
    const double uni = derived.sum().item<double>() + s.mask_gt.sum().item<double>() - inter;
    CHECK(inter / uni >= 0.9);
  }
}

TEST_CASE("synth config validation") {
  SynthConfig cfg;
  cfg.count = 0;
  CHECK_THROWS(cfg.validate());
  cfg.count = 1;
  cfg.glyph_height = {3, 2};
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("stack_samples shapes and bounds") {
  std::vector<Sample> samples(3);
  for (auto& s : samples) {
    s.input = torch::rand({3, 8, 8});
    s.gt = torch::rand({3, 8, 8});
    s.mask_gt = torch::zeros({1, 8, 8});
  }
  auto batch = stack_samples(samples, 1, 2);
  CHECK(batch.input.sizes() == torch::IntArrayRef({2, 3, 8, 8}));
  CHECK(batch.mask_gt.sizes() == torch::IntArrayRef({2, 1, 8, 8}));
  CHECK_THROWS(stack_samples(samples, 2, 2));
}

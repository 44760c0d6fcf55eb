#include "psstr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "psstr/dataset.hpp"
#include "psstr/image_io.hpp"

namespace psstr {

namespace {

// 5x7 bitmap glyphs; hard coverage so the recorded mask is exact.
constexpr int kGlyphRows = 7;
constexpr int kGlyphCols = 5;
const char* kFont[][7] = {
    {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // A
    {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},  // B
    {".####", "#....", "#....", "#....", "#....", "#....", ".####"},  // C
    {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},  // E
    {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},  // F
    {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // H
    {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},  // K
    {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},  // L
    {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"},  // N
    {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},  // P
    {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},  // R
    {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},  // T
    {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // U
    {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},  // X
    {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},  // Y
    {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},  // Z
};
constexpr int kFontSize = sizeof(kFont) / sizeof(kFont[0]);

struct Rng {
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  }
  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive
    return std::uniform_int_distribution<int64_t>(lo, hi)(gen);
  }
  std::mt19937_64 gen;
};

// Smooth textured background in [0.18, 0.78]: linear gradient between two
// colors plus soft blobs and a faint sinusoid.
std::vector<double> render_background(Rng& rng, int64_t h, int64_t w) {
  std::vector<double> img(static_cast<size_t>(3 * h * w));
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.2, 0.7);
    c1[c] = rng.uniform(0.2, 0.7);
  }
  const double ang = rng.uniform(0.0, 2.0 * M_PI);
  const double dx = std::cos(ang), dy = std::sin(ang);

  struct Blob {
    double cx, cy, r, amp[3];
  };
  std::vector<Blob> blobs(static_cast<size_t>(rng.uniform_int(1, 3)));
  for (auto& blob : blobs) {
    blob.cx = rng.uniform(0.0, static_cast<double>(w));
    blob.cy = rng.uniform(0.0, static_cast<double>(h));
    blob.r = rng.uniform(static_cast<double>(h) / 6.0, static_cast<double>(h) / 2.0);
    for (int c = 0; c < 3; ++c) blob.amp[c] = rng.uniform(-0.12, 0.12);
  }
  const double wave_amp = rng.uniform(0.0, 0.04);
  const double wave_fx = rng.uniform(1.0, 5.0) * 2.0 * M_PI / static_cast<double>(w);
  const double wave_fy = rng.uniform(1.0, 5.0) * 2.0 * M_PI / static_cast<double>(h);
  const double wave_phase = rng.uniform(0.0, 2.0 * M_PI);

  const double diag = dx * static_cast<double>(w) + dy * static_cast<double>(h);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double t = (dx * static_cast<double>(x) + dy * static_cast<double>(y)) / diag;
      t = std::clamp(0.5 + t, 0.0, 1.0);
      const double wave =
          wave_amp * std::sin(wave_fx * static_cast<double>(x) + wave_fy * static_cast<double>(y) + wave_phase);
      for (int c = 0; c < 3; ++c) {
        double v = c0[c] + (c1[c] - c0[c]) * t + wave;
        for (const auto& blob : blobs) {
          const double ddx = static_cast<double>(x) - blob.cx;
          const double ddy = static_cast<double>(y) - blob.cy;
          v += blob.amp[c] * std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * blob.r * blob.r));
        }
        img[static_cast<size_t>(c * h * w + y * w + x)] = std::clamp(v, 0.18, 0.78);
      }
    }
  }
  return img;
}

// Channel values pushed to the extremes so the subtraction mask is guaranteed
// to clear the detection threshold against any background value.
void pick_glyph_color(Rng& rng, double color[3]) {
  for (int c = 0; c < 3; ++c)
    color[c] = rng.uniform(0.0, 1.0) < 0.5 ? rng.uniform(0.0, 0.06) : rng.uniform(0.94, 1.0);
}

}  // namespace

void SynthConfig::validate() const {
  if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
  if (image_size[0] < 32 || image_size[1] < 32)
    throw std::invalid_argument("synth: image_size must be at least 32");
  if (strings_per_image[0] < 1 || strings_per_image[0] > strings_per_image[1])
    throw std::invalid_argument("synth: invalid strings_per_image range");
  if (glyphs_per_string[0] < 1 || glyphs_per_string[0] > glyphs_per_string[1])
    throw std::invalid_argument("synth: invalid glyphs_per_string range");
  if (glyph_height[0] < kGlyphRows || glyph_height[0] > glyph_height[1])
    throw std::invalid_argument("synth: invalid glyph_height range");
}

SynthSample synth_sample(const SynthConfig& cfg, int64_t index) {
  cfg.validate();
  const int64_t h = cfg.image_size[0], w = cfg.image_size[1];
  Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(index),
                   cfg.split == "train" ? 0x7261696eULL : 0x74657374ULL));

  auto gt = render_background(rng, h, w);
  auto input = gt;
  std::vector<char> mask(static_cast<size_t>(h * w), 0);

  const int64_t strings = rng.uniform_int(cfg.strings_per_image[0], cfg.strings_per_image[1]);
  for (int64_t s = 0; s < strings; ++s) {
    double color[3];
    pick_glyph_color(rng, color);
    const int64_t cell_h =
        std::min<int64_t>(rng.uniform_int(cfg.glyph_height[0], cfg.glyph_height[1]), h);
    const int64_t cell_w = std::max<int64_t>(1, cell_h * kGlyphCols / kGlyphRows);
    const int64_t spacing = std::max<int64_t>(1, cell_w / 4);
    int64_t length = rng.uniform_int(cfg.glyphs_per_string[0], cfg.glyphs_per_string[1]);
    auto string_width = [&](int64_t n) { return n * cell_w + (n - 1) * spacing; };
    while (length > 1 && string_width(length) > w) --length;

    const int64_t x0 = rng.uniform_int(0, std::max<int64_t>(0, w - string_width(length)));
    const int64_t y0 = rng.uniform_int(0, std::max<int64_t>(0, h - cell_h));
    for (int64_t g = 0; g < length; ++g) {
      const auto& glyph = kFont[rng.uniform_int(0, kFontSize - 1)];
      const int64_t gx = x0 + g * (cell_w + spacing);
      for (int64_t yy = 0; yy < cell_h; ++yy) {
        const int64_t row = yy * kGlyphRows / cell_h;
        const int64_t py = y0 + yy;
        if (py < 0 || py >= h) continue;
        for (int64_t xx = 0; xx < cell_w; ++xx) {
          const int64_t col = xx * kGlyphCols / cell_w;
          const int64_t px = gx + xx;
          if (px < 0 || px >= w || glyph[row][col] != '#') continue;
          mask[static_cast<size_t>(py * w + px)] = 1;
          for (int c = 0; c < 3; ++c)
            input[static_cast<size_t>(c * h * w + py * w + px)] = color[c];
        }
      }
    }
  }

  SynthSample out;
  out.gt = torch::empty({3, h, w}, torch::kFloat32);
  out.input = torch::empty({3, h, w}, torch::kFloat32);
  out.mask = torch::empty({1, h, w}, torch::kFloat32);
  auto ga = out.gt.accessor<float, 3>();
  auto ia = out.input.accessor<float, 3>();
  auto ma = out.mask.accessor<float, 3>();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        ga[c][y][x] = static_cast<float>(gt[static_cast<size_t>(c * h * w + y * w + x)]);
        ia[c][y][x] = static_cast<float>(input[static_cast<size_t>(c * h * w + y * w + x)]);
      }
      ma[0][y][x] = mask[static_cast<size_t>(y * w + x)] ? 1.0f : 0.0f;
    }
  }
  return out;
}

void synth_toy_dataset(const std::filesystem::path& root, const SynthConfig& cfg) {
  cfg.validate();
  const auto base = root / cfg.split;
  std::filesystem::create_directories(base / "input");
  std::filesystem::create_directories(base / "gt");
  std::filesystem::create_directories(base / "mask");
  for (int64_t i = 0; i < cfg.count; ++i) {
    auto sample = synth_sample(cfg, i);
    char name[16];
    std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(i));
    save_image(base / "input" / name, sample.input);
    save_image(base / "gt" / name, sample.gt);
    save_image(base / "mask" / name, sample.mask);
  }
}

}  // namespace psstr

#include "psstr/image_io.hpp"

#include <algorithm>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace psstr {

bool is_image_file(const std::filesystem::path& p) {
  static const char* exts[] = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tif", ".tiff"};
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return std::find(std::begin(exts), std::end(exts), ext) != std::end(exts);
}

torch::Tensor load_image(const std::filesystem::path& p) {
  cv::Mat bgr = cv::imread(p.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode image: " + p.string());
  auto t = torch::empty({3, bgr.rows, bgr.cols}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      acc[0][y][x] = static_cast<float>(row[x][2]) / 255.0f;
      acc[1][y][x] = static_cast<float>(row[x][1]) / 255.0f;
      acc[2][y][x] = static_cast<float>(row[x][0]) / 255.0f;
    }
  }
  return t;
}

void save_image(const std::filesystem::path& p, const torch::Tensor& t) {
  auto x = t.detach().to(torch::kCPU, torch::kFloat32);
  if (x.dim() == 4) {
    TORCH_CHECK(x.size(0) == 1, "save_image: expected a single image, got batch ", x.size(0));
    x = x.squeeze(0);
  }
  TORCH_CHECK(x.dim() == 3 && (x.size(0) == 3 || x.size(0) == 1),
              "save_image: expected (3,H,W) or (1,H,W), got ", t.sizes());
  if (x.size(0) == 1) x = x.expand({3, x.size(1), x.size(2)});
  x = x.contiguous();
  const int h = static_cast<int>(x.size(1));
  const int w = static_cast<int>(x.size(2));
  cv::Mat bgr(h, w, CV_8UC3);
  auto acc = x.accessor<float, 3>();
  for (int y = 0; y < h; ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int xw = 0; xw < w; ++xw) {
      row[xw][0] = static_cast<unsigned char>(quantize8(acc[2][y][xw]));
      row[xw][1] = static_cast<unsigned char>(quantize8(acc[1][y][xw]));
      row[xw][2] = static_cast<unsigned char>(quantize8(acc[0][y][xw]));
    }
  }
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  if (!cv::imwrite(p.string(), bgr))
    throw std::runtime_error("cannot encode image: " + p.string());
}

}  // namespace psstr

#include "psstr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "psstr/image_io.hpp"

namespace psstr {

namespace {

constexpr double kPsnrCap = 100.0;       // dB reported when mse == 0
constexpr int kErrorThreshold = 20;      // 8-bit gray difference for an error pixel
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

// (b,3,H,W) double CPU contiguous.
torch::Tensor canon(const torch::Tensor& t, const char* what) {
  TORCH_CHECK(t.defined(), what, ": undefined tensor");
  auto x = t;
  if (x.dim() == 3) x = x.unsqueeze(0);
  TORCH_CHECK(x.dim() == 4 && x.size(1) == 3, what, ": expected (3,H,W) or (b,3,H,W), got ",
              t.sizes());
  return x.to(torch::kCPU, torch::kFloat64).contiguous();
}

std::pair<torch::Tensor, torch::Tensor> canon_pair(const torch::Tensor& a,
                                                   const torch::Tensor& b, const char* what) {
  auto ca = canon(a, what);
  auto cb = canon(b, what);
  TORCH_CHECK(ca.sizes() == cb.sizes(), what, ": shape mismatch, ", a.sizes(), " vs ", b.sizes());
  return {ca, cb};
}

inline double gray(const double* px, int64_t plane) {
  return 0.299 * px[0] + 0.587 * px[plane] + 0.114 * px[2 * plane];
}

inline int gray255(const double* px, int64_t plane) {
  double g = gray(px, plane);
  return quantize8(g);
}

// Per-image grayscale in [0,1].
std::vector<double> gray_image(const double* data, int64_t h, int64_t w) {
  std::vector<double> g(static_cast<size_t>(h * w));
  const int64_t plane = h * w;
  for (int64_t i = 0; i < plane; ++i) g[static_cast<size_t>(i)] = gray(data + i, plane);
  return g;
}

std::vector<int> gray_image8(const double* data, int64_t h, int64_t w) {
  std::vector<int> g(static_cast<size_t>(h * w));
  const int64_t plane = h * w;
  for (int64_t i = 0; i < plane; ++i) g[static_cast<size_t>(i)] = gray255(data + i, plane);
  return g;
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    w[static_cast<size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Single-image SSIM, valid windows only, separable Gaussian filtering.
double ssim_gray(const std::vector<double>& a, const std::vector<double>& b, int64_t h,
                 int64_t w) {
  const auto win = gaussian_window(kSsimWindow, kSsimSigma);
  const int64_t r = kSsimWindow / 2;
  const int64_t vh = h - 2 * r, vw = w - 2 * r;
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;  // dynamic range 1.0

  // Horizontal pass over the five products, then vertical.
  const size_t fields = 5;
  std::vector<double> horiz(fields * static_cast<size_t>(h * vw));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < vw; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int64_t k = 0; k < kSsimWindow; ++k) {
        const double va = a[static_cast<size_t>(y * w + x + k)];
        const double vb = b[static_cast<size_t>(y * w + x + k)];
        const double wk = win[static_cast<size_t>(k)];
        sa += wk * va;
        sb += wk * vb;
        saa += wk * va * va;
        sbb += wk * vb * vb;
        sab += wk * va * vb;
      }
      const size_t base = static_cast<size_t>(y * vw + x) * fields;
      horiz[base] = sa;
      horiz[base + 1] = sb;
      horiz[base + 2] = saa;
      horiz[base + 3] = sbb;
      horiz[base + 4] = sab;
    }
  }
  double total = 0;
  for (int64_t y = 0; y < vh; ++y) {
    for (int64_t x = 0; x < vw; ++x) {
      double mu_a = 0, mu_b = 0, saa = 0, sbb = 0, sab = 0;
      for (int64_t k = 0; k < kSsimWindow; ++k) {
        const size_t base = static_cast<size_t>((y + k) * vw + x) * fields;
        const double wk = win[static_cast<size_t>(k)];
        mu_a += wk * horiz[base];
        mu_b += wk * horiz[base + 1];
        saa += wk * horiz[base + 2];
        sbb += wk * horiz[base + 3];
        sab += wk * horiz[base + 4];
      }
      const double var_a = saa - mu_a * mu_a;
      const double var_b = sbb - mu_b * mu_b;
      const double cov = sab - mu_a * mu_b;
      const double s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      total += s;
    }
  }
  return total / static_cast<double>(vh * vw);
}

}  // namespace

double mse(const torch::Tensor& a, const torch::Tensor& b) {
  auto [ca, cb] = canon_pair(a, b, "mse");
  const double* pa = ca.data_ptr<double>();
  const double* pb = cb.data_ptr<double>();
  const int64_t n = ca.numel();
  double sum = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = pa[i] - pb[i];
    sum += d * d;
  }
  return sum / static_cast<double>(n);
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return -10.0 * std::log10(m);
}

double mssim(const torch::Tensor& a, const torch::Tensor& b) {
  auto [ca, cb] = canon_pair(a, b, "mssim");
  const int64_t bs = ca.size(0), h = ca.size(2), w = ca.size(3);
  TORCH_CHECK(h >= kSsimWindow && w >= kSsimWindow, "mssim: image ", h, "x", w,
              " is smaller than the ", kSsimWindow, "x", kSsimWindow, " window");
  double total = 0;
  for (int64_t i = 0; i < bs; ++i) {
    const double* pa = ca.data_ptr<double>() + i * 3 * h * w;
    const double* pb = cb.data_ptr<double>() + i * 3 * h * w;
    total += ssim_gray(gray_image(pa, h, w), gray_image(pb, h, w), h, w);
  }
  return 100.0 * total / static_cast<double>(bs);
}

double age(const torch::Tensor& a, const torch::Tensor& b) {
  auto [ca, cb] = canon_pair(a, b, "age");
  const int64_t bs = ca.size(0), h = ca.size(2), w = ca.size(3);
  double sum = 0;
  for (int64_t i = 0; i < bs; ++i) {
    auto ga = gray_image8(ca.data_ptr<double>() + i * 3 * h * w, h, w);
    auto gb = gray_image8(cb.data_ptr<double>() + i * 3 * h * w, h, w);
    for (int64_t p = 0; p < h * w; ++p)
      sum += std::abs(ga[static_cast<size_t>(p)] - gb[static_cast<size_t>(p)]);
  }
  return sum / static_cast<double>(bs * h * w);
}

namespace {

std::vector<char> error_map(const torch::Tensor& ca, const torch::Tensor& cb, int64_t image,
                            int64_t h, int64_t w) {
  auto ga = gray_image8(ca.data_ptr<double>() + image * 3 * h * w, h, w);
  auto gb = gray_image8(cb.data_ptr<double>() + image * 3 * h * w, h, w);
  std::vector<char> err(static_cast<size_t>(h * w));
  for (int64_t p = 0; p < h * w; ++p)
    err[static_cast<size_t>(p)] =
        std::abs(ga[static_cast<size_t>(p)] - gb[static_cast<size_t>(p)]) > kErrorThreshold;
  return err;
}

}  // namespace

double peps(const torch::Tensor& a, const torch::Tensor& b) {
  auto [ca, cb] = canon_pair(a, b, "peps");
  const int64_t bs = ca.size(0), h = ca.size(2), w = ca.size(3);
  int64_t count = 0;
  for (int64_t i = 0; i < bs; ++i) {
    auto err = error_map(ca, cb, i, h, w);
    for (char e : err) count += e;
  }
  return static_cast<double>(count) / static_cast<double>(bs * h * w);
}

double pceps(const torch::Tensor& a, const torch::Tensor& b) {
  auto [ca, cb] = canon_pair(a, b, "pceps");
  const int64_t bs = ca.size(0), h = ca.size(2), w = ca.size(3);
  int64_t count = 0;
  for (int64_t i = 0; i < bs; ++i) {
    auto err = error_map(ca, cb, i, h, w);
    auto at = [&](int64_t y, int64_t x) { return err[static_cast<size_t>(y * w + x)]; };
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        if (!at(y, x)) continue;
        // clustered: every existing 4-neighbor is an error pixel too
        const bool clustered = (y == 0 || at(y - 1, x)) && (y == h - 1 || at(y + 1, x)) &&
                               (x == 0 || at(y, x - 1)) && (x == w - 1 || at(y, x + 1));
        count += clustered;
      }
    }
  }
  return static_cast<double>(count) / static_cast<double>(bs * h * w);
}

MetricReport compute_metrics(const torch::Tensor& a, const torch::Tensor& b) {
  MetricReport r;
  r.mse = mse(a, b);
  r.psnr = r.mse == 0.0 ? kPsnrCap : -10.0 * std::log10(r.mse);
  r.mssim = mssim(a, b);
  r.age = age(a, b);
  r.peps = peps(a, b);
  r.pceps = pceps(a, b);
  return r;
}

double mask_iou(const torch::Tensor& pred, const torch::Tensor& gt) {
  TORCH_CHECK(pred.sizes() == gt.sizes(), "mask_iou: shape mismatch, ", pred.sizes(), " vs ",
              gt.sizes());
  auto p = pred.ge(0.5);
  auto g = gt.ge(0.5);
  const double inter = (p & g).sum().item<double>();
  const double uni = (p | g).sum().item<double>();
  return uni == 0.0 ? 1.0 : inter / uni;
}

MetricReport mean_report(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  MetricReport m;
  if (rows.empty()) return m;
  for (const auto& [name, r] : rows) {
    m.psnr += r.psnr;
    m.mse += r.mse;
    m.mssim += r.mssim;
    m.age += r.age;
    m.peps += r.peps;
    m.pceps += r.pceps;
  }
  const double n = static_cast<double>(rows.size());
  m.psnr /= n;
  m.mse /= n;
  m.mssim /= n;
  m.age /= n;
  m.peps /= n;
  m.pceps /= n;
  return m;
}

DirEvalResult evaluate_dir(const std::filesystem::path& pred_dir,
                           const std::filesystem::path& gt_dir) {
  auto index_dir = [](const std::filesystem::path& dir) {
    std::map<std::string, std::filesystem::path> by_stem;
    if (std::filesystem::is_directory(dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path()))
          by_stem[entry.path().stem().string()] = entry.path();
      }
    }
    return by_stem;
  };
  auto preds = index_dir(pred_dir);
  auto gts = index_dir(gt_dir);

  DirEvalResult result;
  for (const auto& [stem, path] : preds) {
    auto it = gts.find(stem);
    if (it == gts.end()) {
      result.errors.push_back(stem + ": no ground-truth counterpart");
      continue;
    }
    try {
      auto a = load_image(path);
      auto b = load_image(it->second);
      if (a.sizes() != b.sizes()) {
        result.errors.push_back(stem + ": size mismatch");
        continue;
      }
      result.per_image.emplace_back(stem, compute_metrics(a, b));
    } catch (const std::exception& e) {
      result.errors.push_back(stem + ": " + e.what());
    }
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.count(stem)) result.errors.push_back(stem + ": no prediction counterpart");
  }
  if (result.per_image.empty())
    throw std::runtime_error("evaluate_dir: no matching image pairs between " +
                             pred_dir.string() + " and " + gt_dir.string());
  result.mean = mean_report(result.per_image);
  return result;
}

namespace {

void format_row(std::ostream& os, const std::string& name, const MetricReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %8.3f %9.6f %8.3f %9.4f %8.5f %8.5f", name.c_str(),
                r.psnr, r.mse, r.mssim, r.age, r.peps, r.pceps);
  os << buf << "\n";
}

}  // namespace

std::string report_table(const DirEvalResult& r) {
  std::ostringstream os;
  char head[160];
  std::snprintf(head, sizeof(head), "%-24s %8s %9s %8s %9s %8s %8s", "image", "psnr", "mse",
                "mssim", "age", "peps", "pceps");
  os << head << "\n";
  for (const auto& [name, report] : r.per_image) format_row(os, name, report);
  format_row(os, "mean", r.mean);
  if (!r.errors.empty()) {
    os << "errors:\n";
    for (const auto& e : r.errors) os << "  " << e << "\n";
  }
  return os.str();
}

void write_report_text(const std::filesystem::path& path, const DirEvalResult& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << report_table(r);
}

namespace {

nlohmann::json report_json(const MetricReport& r) {
  return {{"psnr", r.psnr}, {"mse", r.mse},   {"mssim", r.mssim},
          {"age", r.age},   {"peps", r.peps}, {"pceps", r.pceps}};
}

}  // namespace

void write_report_json(const std::filesystem::path& path, const DirEvalResult& r) {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const auto& [name, report] : r.per_image) {
    auto row = report_json(report);
    row["name"] = name;
    j["images"].push_back(row);
  }
  j["mean"] = report_json(r.mean);
  j["errors"] = r.errors;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace psstr

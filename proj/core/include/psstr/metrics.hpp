#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace psstr {

// The six image-quality numbers for one pair or an aggregate.
//   psnr  : dB, capped at 100 when mse == 0
//   mse   : on the [0,1] intensity scale
//   mssim : percent
//   age   : mean absolute 8-bit gray difference (0..255 scale)
//   peps  : fraction of pixels with 8-bit gray difference > 20
//   pceps : fraction of error pixels whose existing 4-neighbors are all errors
struct MetricReport {
  double psnr = 0, mse = 0, mssim = 0, age = 0, peps = 0, pceps = 0;
};

// All metrics accept (3,H,W) or (b,3,H,W) tensors with values in [0,1] and
// compute in double precision with a fixed summation order.
double mse(const torch::Tensor& a, const torch::Tensor& b);
double psnr(const torch::Tensor& a, const torch::Tensor& b);
double mssim(const torch::Tensor& a, const torch::Tensor& b);
double age(const torch::Tensor& a, const torch::Tensor& b);
double peps(const torch::Tensor& a, const torch::Tensor& b);
double pceps(const torch::Tensor& a, const torch::Tensor& b);
MetricReport compute_metrics(const torch::Tensor& a, const torch::Tensor& b);

// Intersection-over-union of binarized masks (threshold 0.5); 1.0 if both empty.
double mask_iou(const torch::Tensor& pred, const torch::Tensor& gt);

struct DirEvalResult {
  std::vector<std::pair<std::string, MetricReport>> per_image;  // sorted by name
  MetricReport mean;
  std::vector<std::string> errors;  // unmatched or unreadable files
};

// Evaluates name-matched (by stem) image pairs from two directories.
// Throws std::runtime_error if no pair matches.
DirEvalResult evaluate_dir(const std::filesystem::path& pred_dir,
                           const std::filesystem::path& gt_dir);

MetricReport mean_report(const std::vector<std::pair<std::string, MetricReport>>& rows);

std::string report_table(const DirEvalResult& r);  // human-readable table
void write_report_text(const std::filesystem::path& path, const DirEvalResult& r);
void write_report_json(const std::filesystem::path& path, const DirEvalResult& r);

}  // namespace psstr

#pragma once

#include <string>

#include "gst/synthdata.hpp"
#include "gst/tensor.hpp"

namespace gst {

struct MetricReport {
    double l1_mean = 0.0;  // 0-255 scale
    double ssim = 0.0;
    double psnr = 0.0;  // dB, capped
    int n_images = 0;
};

// Mean absolute error, computed in [0,1] and reported on the 0-255 scale.
double l1_mean(const Tensor& a, const Tensor& b);

// 10*log10(max_val^2 / MSE); returns `cap` when MSE < 1e-10.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0, double cap = 99.0);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1=(0.01L)^2,
// C2=(0.03L)^2 with L=1, aggregated over fully-valid window positions only.
double ssim(const Tensor& a, const Tensor& b);

// Scores pred_dir/pred_<id>.pgm against the manifest's clean images and
// appends one CSV row per image plus a summary row.
MetricReport evaluate_set(const std::string& pred_dir, const DatasetManifest& oracle_manifest,
                          const std::string& csv_path);

}  // namespace gst

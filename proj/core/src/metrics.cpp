#include "gst/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gst/pgm.hpp"

namespace gst {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape != b.shape)
        throw Error(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                    shape_str(b.shape));
}

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (0.01*L)^2, L=1
constexpr double kC2 = 0.03 * 0.03;

const double* gaussian_window() {
    static double w[kWin * kWin];
    static bool ready = false;
    if (!ready) {
        const int r = kWin / 2;
        double total = 0.0;
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j) {
                const double d2 = static_cast<double>((i - r) * (i - r) + (j - r) * (j - r));
                w[i * kWin + j] = std::exp(-d2 / (2.0 * kWinSigma * kWinSigma));
                total += w[i * kWin + j];
            }
        for (double& v : w) v /= total;
        ready = true;
    }
    return w;
}

}  // namespace

double l1_mean(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "l1_mean");
    if (a.size() == 0) throw Error("l1_mean: empty image");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        acc += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
    return acc / static_cast<double>(a.size()) * 255.0;
}

double psnr(const Tensor& a, const Tensor& b, double max_val, double cap) {
    require_same_shape(a, b, "psnr");
    if (a.size() == 0) throw Error("psnr: empty image");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(a.size());
    if (mse < 1e-10) return cap;
    return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.shape.size() != 3 || a.shape[0] != 1)
        throw Error("ssim: expected [1,H,W] images, got " + shape_str(a.shape));
    const int h = a.shape[1], w = a.shape[2];
    if (h < kWin || w < kWin)
        throw Error("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                    " smaller than the " + std::to_string(kWin) + "x" + std::to_string(kWin) +
                    " window");
    const double* win = gaussian_window();

    double total = 0.0;
    long count = 0;
    for (int i = 0; i + kWin <= h; ++i) {
        for (int j = 0; j + kWin <= w; ++j) {
            double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int u = 0; u < kWin; ++u) {
                const float* ra = a.data.data() + static_cast<std::size_t>(i + u) * w + j;
                const float* rb = b.data.data() + static_cast<std::size_t>(i + u) * w + j;
                const double* rw = win + u * kWin;
                for (int v = 0; v < kWin; ++v) {
                    const double pa = ra[v], pb = rb[v], pw = rw[v];
                    ma += pw * pa;
                    mb += pw * pb;
                    saa += pw * pa * pa;
                    sbb += pw * pb * pb;
                    sab += pw * pa * pb;
                }
            }
            const double va = saa - ma * ma;
            const double vb = sbb - mb * mb;
            const double cov = sab - ma * mb;
            total += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                     ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

MetricReport evaluate_set(const std::string& pred_dir, const DatasetManifest& oracle_manifest,
                          const std::string& csv_path) {
    namespace fs = std::filesystem;
    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path, std::ios::trunc);
        if (!csv) throw Error("evaluate_set: cannot open '" + csv_path + "'");
        csv << "image_id,l1,ssim,psnr\n";
    }

    MetricReport report;
    for (const auto& e : oracle_manifest.entries) {
        const fs::path pred_path = fs::path(pred_dir) / ("pred_" + e.id + ".pgm");
        if (!fs::exists(pred_path))
            throw Error("evaluate_set: missing prediction '" + pred_path.string() + "'");
        if (e.clean_path.empty())
            throw Error("evaluate_set: entry '" + e.id + "' has no oracle image");
        fs::path clean(e.clean_path);
        if (!clean.is_absolute() && !oracle_manifest.base_dir.empty())
            clean = fs::path(oracle_manifest.base_dir) / clean;

        const Tensor pred = read_pgm(pred_path.string());
        const Tensor truth = read_pgm(clean.string());
        const double l1 = l1_mean(pred, truth);
        const double ss = ssim(pred, truth);
        const double ps = psnr(pred, truth);
        report.l1_mean += l1;
        report.ssim += ss;
        report.psnr += ps;
        ++report.n_images;
        if (csv.is_open()) {
            char row[160];
            std::snprintf(row, sizeof(row), "%s,%.6f,%.6f,%.6f\n", e.id.c_str(), l1, ss, ps);
            csv << row;
        }
    }
    if (report.n_images == 0) throw Error("evaluate_set: empty manifest");
    report.l1_mean /= report.n_images;
    report.ssim /= report.n_images;
    report.psnr /= report.n_images;
    if (csv.is_open()) {
        char row[160];
        std::snprintf(row, sizeof(row), "mean,%.6f,%.6f,%.6f\n", report.l1_mean, report.ssim,
                      report.psnr);
        csv << row;
        if (!csv) throw Error("evaluate_set: write to '" + csv_path + "' failed");
    }
    return report;
}

}  // namespace gst

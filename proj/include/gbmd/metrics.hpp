#pragma once

#include <span>
#include <string>
#include <vector>

#include "gbmd/image.hpp"

namespace gbmd {

// Mean squared error over all elements. Shapes must match (ContractError).
double mse(const ImageTensor& a, const ImageTensor& b);

// 10 log10(peak^2 / MSE), capped at 100 dB (the cap is also the MSE = 0 value).
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0);

// Mean local SSIM with the Wang et al. constants: Gaussian window (sigma 1.5),
// C1 = (k1 peak)^2, C2 = (k2 peak)^2, window applied wherever it fits fully,
// channels averaged. Images smaller than the window are rejected.
double ssim(const ImageTensor& a, const ImageTensor& b, int window = 11, double k1 = 0.01,
            double k2 = 0.03, double peak = 1.0);

struct MetricRow {
    std::string name;
    double mse = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
};

// Per-image rows plus the arithmetic means over images.
struct MetricReport {
    std::vector<MetricRow> rows;
    double mean_mse = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

MetricRow evaluate_pair(const std::string& name, const ImageTensor& clean,
                        const ImageTensor& test);
MetricReport evaluate_set(std::span<const ImageTensor> clean, std::span<const ImageTensor> test,
                          std::span<const std::string> names);

// The report in comma-separated text: header, one row per image, aggregate row.
std::string report_csv(const MetricReport& report);

} // namespace gbmd

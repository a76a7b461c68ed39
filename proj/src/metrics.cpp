#include "gbmd/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

namespace {

constexpr double kPsnrCap = 100.0;

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* fn) {
    if (!(a.shape == b.shape))
        throw ContractError(std::string(fn) + ": image shapes do not match");
}

std::vector<double> gaussian_kernel(int window, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(window));
    const double c = (window - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        k[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Valid-mode separable blur: horizontal pass then vertical pass.
// Input H x W, output (H - window + 1) x (W - window + 1).
std::vector<double> blur_valid(const std::vector<double>& img, int H, int W,
                               const std::vector<double>& k) {
    const int win = static_cast<int>(k.size());
    const int Wo = W - win + 1;
    const int Ho = H - win + 1;
    std::vector<double> tmp(static_cast<std::size_t>(H) * Wo);
    for (int i = 0; i < H; ++i) {
        for (int j = 0; j < Wo; ++j) {
            double acc = 0.0;
            for (int t = 0; t < win; ++t) acc += k[static_cast<std::size_t>(t)] * img[i * W + j + t];
            tmp[static_cast<std::size_t>(i) * Wo + j] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(Ho) * Wo);
    for (int i = 0; i < Ho; ++i) {
        for (int j = 0; j < Wo; ++j) {
            double acc = 0.0;
            for (int t = 0; t < win; ++t) acc += k[static_cast<std::size_t>(t)] * tmp[(i + t) * Wo + j];
            out[static_cast<std::size_t>(i) * Wo + j] = acc;
        }
    }
    return out;
}

} // namespace

double mse(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "mse");
    if (a.data.empty()) throw ContractError("mse: empty image");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const ImageTensor& a, const ImageTensor& b, double peak) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    const double m = mse(a, b);
    if (m == 0.0) return kPsnrCap;
    const double db = 10.0 * std::log10(peak * peak / m);
    return db > kPsnrCap ? kPsnrCap : db;
}

double ssim(const ImageTensor& a, const ImageTensor& b, int window, double k1, double k2,
            double peak) {
    require_same_shape(a, b, "ssim");
    if (window < 1 || window % 2 == 0)
        throw std::invalid_argument("ssim: window must be a positive odd size");
    if (a.shape.height < window || a.shape.width < window)
        throw std::invalid_argument("ssim: image " + std::to_string(a.shape.height) + "x" +
                                    std::to_string(a.shape.width) +
                                    " is smaller than the window " + std::to_string(window));
    const double c1 = (k1 * peak) * (k1 * peak);
    const double c2 = (k2 * peak) * (k2 * peak);
    const std::vector<double> kern = gaussian_kernel(window, 1.5);

    const int H = a.shape.height;
    const int W = a.shape.width;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    double channel_sum = 0.0;
    for (int c = 0; c < a.shape.channels; ++c) {
        std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
        const double* ap = a.data.data() + static_cast<std::size_t>(c) * plane;
        const double* bp = b.data.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            pa[i] = ap[i];
            pb[i] = bp[i];
            paa[i] = ap[i] * ap[i];
            pbb[i] = bp[i] * bp[i];
            pab[i] = ap[i] * bp[i];
        }
        const std::vector<double> mu_a = blur_valid(pa, H, W, kern);
        const std::vector<double> mu_b = blur_valid(pb, H, W, kern);
        const std::vector<double> raw_aa = blur_valid(paa, H, W, kern);
        const std::vector<double> raw_bb = blur_valid(pbb, H, W, kern);
        const std::vector<double> raw_ab = blur_valid(pab, H, W, kern);

        double acc = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = raw_aa[i] - mu_a[i] * mu_a[i];
            const double vb = raw_bb[i] - mu_b[i] * mu_b[i];
            const double vab = raw_ab[i] - mu_a[i] * mu_b[i];
            const double num = (2.0 * (mu_a[i] * mu_b[i]) + c1) * (2.0 * vab + c2);
            const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
            acc += num / den;
        }
        channel_sum += acc / static_cast<double>(mu_a.size());
    }
    return channel_sum / static_cast<double>(a.shape.channels);
}

MetricRow evaluate_pair(const std::string& name, const ImageTensor& clean,
                        const ImageTensor& test) {
    MetricRow row;
    row.name = name;
    row.mse = mse(clean, test);
    row.psnr = psnr(clean, test);
    row.ssim = ssim(clean, test);
    return row;
}

MetricReport evaluate_set(std::span<const ImageTensor> clean, std::span<const ImageTensor> test,
                          std::span<const std::string> names) {
    if (clean.size() != test.size() || clean.size() != names.size())
        throw ContractError("evaluate_set: clean/test/name counts do not match (" +
                            std::to_string(clean.size()) + ", " + std::to_string(test.size()) +
                            ", " + std::to_string(names.size()) + ")");
    if (clean.empty()) throw ContractError("evaluate_set: no image pairs");
    MetricReport report;
    report.rows.reserve(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
        report.rows.push_back(evaluate_pair(names[i], clean[i], test[i]));
        report.mean_mse += report.rows.back().mse;
        report.mean_psnr += report.rows.back().psnr;
        report.mean_ssim += report.rows.back().ssim;
    }
    const double n = static_cast<double>(report.rows.size());
    report.mean_mse /= n;
    report.mean_psnr /= n;
    report.mean_ssim /= n;
    return report;
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream os;
    os.precision(10);
    os << "name,mse,psnr,ssim\n";
    for (const MetricRow& row : report.rows)
        os << row.name << ',' << row.mse << ',' << row.psnr << ',' << row.ssim << '\n';
    os << "aggregate," << report.mean_mse << ',' << report.mean_psnr << ',' << report.mean_ssim
       << '\n';
    return os.str();
}

} // namespace gbmd

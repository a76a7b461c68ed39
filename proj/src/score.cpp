#include "gbmd/score.hpp"

#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

Volume analytic_delta_score(const LogImage& y, int k, const LogImage& y0, const NoiseSchedule& s) {
    if (!(y.shape == y0.shape)) {
        throw ShapeError("analytic_delta_score: y and y0 shapes differ");
    }
    if (k < 1 || k > s.K) {
        throw DegenerateKernelError("analytic_delta_score: step " + std::to_string(k) +
                                    " has no positive-variance kernel");
    }
    const double eta = s.eta_at(k);
    Volume out{y.shape, std::vector<double>(y.data.size())};
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        out.data[i] = -(y.data[i] - y0.data[i] + 0.5 * eta) / eta;
    }
    return out;
}

Volume analytic_gaussian_score(const LogImage& y, int k, const Volume& mu0, const Volume& var0,
                               const NoiseSchedule& s) {
    if (!(y.shape == mu0.shape) || !(y.shape == var0.shape)) {
        throw ShapeError("analytic_gaussian_score: shapes of y, mu0, var0 differ");
    }
    if (k < 0 || k > s.K) {
        throw DegenerateKernelError("analytic_gaussian_score: step " + std::to_string(k) +
                                    " outside schedule");
    }
    const double eta = s.eta_at(k);
    Volume out{y.shape, std::vector<double>(y.data.size())};
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        if (var0.data[i] < 0.0) {
            throw std::domain_error("analytic_gaussian_score: var0 must be >= 0");
        }
        const double total_var = var0.data[i] + eta;
        if (!(total_var > 0.0)) {
            throw DegenerateKernelError(
                "analytic_gaussian_score: var0 + eta(k) is zero at index " + std::to_string(i));
        }
        out.data[i] = -(y.data[i] - mu0.data[i] + 0.5 * eta) / total_var;
    }
    return out;
}

Volume analytic_gaussian_score(const LogImage& y, int k, const LogImage& mu0, double var0,
                               const NoiseSchedule& s) {
    return analytic_gaussian_score(y, k, Volume{mu0.shape, mu0.data},
                                   Volume::full(mu0.shape, var0), s);
}

} // namespace gbmd

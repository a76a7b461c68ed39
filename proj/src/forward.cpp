#include "gbmd/forward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

namespace {

Volume draw_standard_normal(Shape3 shape, RandomSource& rng) {
    Volume n{shape, std::vector<double>(shape.numel())};
    for (double& v : n.data) {
        v = rng.gaussian();
    }
    return n;
}

void check_step(int k, const NoiseSchedule& s, const char* what) {
    if (k < 0 || k > s.K) {
        throw std::out_of_range(std::string(what) + ": step " + std::to_string(k) +
                                " outside 0.." + std::to_string(s.K));
    }
}

} // namespace

ForwardSample corrupt_log_with_noise(const LogImage& y0, int k, const NoiseSchedule& s,
                                     Volume noise) {
    check_step(k, s, "corrupt_log");
    if (!(noise.shape == y0.shape)) {
        throw ShapeError("corrupt_log: noise shape does not match image shape");
    }
    const double eta = s.eta_at(k);
    const double drift = -0.5 * eta;
    const double diffusion = std::sqrt(eta);

    ForwardSample out;
    out.k = k;
    out.y_k.shape = y0.shape;
    out.y_k.data.resize(y0.data.size());
    out.factor.shape = y0.shape;
    out.factor.data.resize(y0.data.size());
    for (std::size_t i = 0; i < y0.data.size(); ++i) {
        const double shift = drift + diffusion * noise.data[i];
        out.y_k.data[i] = y0.data[i] + shift;
        out.factor.data[i] = std::exp(shift);
    }
    out.noise = std::move(noise);
    return out;
}

ForwardSample corrupt_log(const LogImage& y0, int k, const NoiseSchedule& s, RandomSource& rng) {
    check_step(k, s, "corrupt_log");
    return corrupt_log_with_noise(y0, k, s, draw_standard_normal(y0.shape, rng));
}

namespace {

std::pair<ImageTensor, ForwardSample> exp_of_sample(Shape3 shape, ForwardSample sample) {
    ImageTensor x_k;
    x_k.shape = shape;
    x_k.data.resize(sample.y_k.data.size());
    for (std::size_t i = 0; i < x_k.data.size(); ++i) {
        x_k.data[i] = std::exp(sample.y_k.data[i]);
    }
    return {std::move(x_k), std::move(sample)};
}

} // namespace

std::pair<ImageTensor, ForwardSample> corrupt_intensity(const ImageTensor& x0, int k,
                                                        const NoiseSchedule& s,
                                                        RandomSource& rng) {
    check_step(k, s, "corrupt_intensity");
    LogImage y0 = log_image(x0); // validates strict positivity before any sampling
    return exp_of_sample(x0.shape, corrupt_log(y0, k, s, rng));
}

std::pair<ImageTensor, ForwardSample> corrupt_intensity_with_noise(const ImageTensor& x0, int k,
                                                                   const NoiseSchedule& s,
                                                                   Volume noise) {
    check_step(k, s, "corrupt_intensity");
    LogImage y0 = log_image(x0);
    return exp_of_sample(x0.shape, corrupt_log_with_noise(y0, k, s, std::move(noise)));
}

LogImage simulate_forward_path_with_noise(const LogImage& y0, int k, const NoiseSchedule& s,
                                          std::span<const Volume> per_step_noise) {
    check_step(k, s, "simulate_forward_path");
    if (per_step_noise.size() != static_cast<std::size_t>(k)) {
        throw ShapeError("simulate_forward_path: expected " + std::to_string(k) +
                         " per-step noise volumes, got " + std::to_string(per_step_noise.size()));
    }
    LogImage y = y0;
    for (int step = 1; step <= k; ++step) {
        const Volume& n = per_step_noise[static_cast<std::size_t>(step) - 1];
        if (!(n.shape == y0.shape)) {
            throw ShapeError("simulate_forward_path: noise shape mismatch at step " +
                             std::to_string(step));
        }
        const double delta = s.increment(step);
        const double drift = -0.5 * delta;
        const double diffusion = std::sqrt(delta);
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            y.data[i] += drift + diffusion * n.data[i];
        }
    }
    return y;
}

LogImage simulate_forward_path(const LogImage& y0, int k, const NoiseSchedule& s,
                               RandomSource& rng) {
    check_step(k, s, "simulate_forward_path");
    LogImage y = y0;
    for (int step = 1; step <= k; ++step) {
        const double delta = s.increment(step);
        const double drift = -0.5 * delta;
        const double diffusion = std::sqrt(delta);
        for (double& v : y.data) {
            v += drift + diffusion * rng.gaussian();
        }
    }
    return y;
}

} // namespace gbmd

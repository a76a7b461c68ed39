#include "gbmd/samplers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

namespace {

void check_step_range(const char* fn, int k, const NoiseSchedule& s) {
    if (k < 1 || k > s.K)
        throw std::out_of_range(std::string(fn) + ": step " + std::to_string(k) +
                                " outside 1.." + std::to_string(s.K));
}

LogImage like(const LogImage& y) {
    LogImage out;
    out.shape = y.shape;
    out.data.resize(y.data.size());
    return out;
}

} // namespace

SamplerMethod sampler_method_from_name(const std::string& name) {
    if (name == "stochastic") return SamplerMethod::stochastic;
    if (name == "ode") return SamplerMethod::ode;
    if (name == "ddim") return SamplerMethod::ddim;
    throw ConfigError("unknown sampler method '" + name + "'");
}

std::string sampler_method_name(SamplerMethod m) {
    switch (m) {
    case SamplerMethod::stochastic: return "stochastic";
    case SamplerMethod::ode: return "ode";
    case SamplerMethod::ddim: return "ddim";
    }
    throw ContractError("sampler_method_name: bad enum value");
}

LogImage stochastic_step_with_noise(const LogImage& y_k, int k, const ScoreModel& model,
                                    const NoiseSchedule& s, const Volume& n) {
    check_step_range("stochastic_step", k, s);
    if (!(n.shape == y_k.shape))
        throw ShapeError("stochastic_step: noise shape does not match image shape");
    const double delta = s.increment(k);
    const double root = std::sqrt(delta);
    const Volume sc = model.evaluate(y_k, k);
    LogImage out = like(y_k);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = y_k.data[i] + 0.5 * delta * (1.0 + 2.0 * sc.data[i]) + root * n.data[i];
    return out;
}

LogImage stochastic_step(const LogImage& y_k, int k, const ScoreModel& model,
                         const NoiseSchedule& s, RandomSource& rng) {
    check_step_range("stochastic_step", k, s);
    Volume n{y_k.shape, std::vector<double>(y_k.data.size())};
    for (double& v : n.data) v = rng.gaussian();
    return stochastic_step_with_noise(y_k, k, model, s, n);
}

LogImage ode_step(const LogImage& y_k, int k, const ScoreModel& model, const NoiseSchedule& s) {
    check_step_range("ode_step", k, s);
    const double delta = s.increment(k);
    const Volume sc = model.evaluate(y_k, k);
    LogImage out = like(y_k);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = y_k.data[i] + 0.5 * delta * (1.0 + sc.data[i]);
    return out;
}

LogImage predict_y0(const LogImage& y_k, int k, const ScoreModel& model, const NoiseSchedule& s) {
    if (k == 0) return y_k;
    check_step_range("predict_y0", k, s);
    const double eta = s.eta_at(k);
    const Volume sc = model.evaluate(y_k, k);
    LogImage out = like(y_k);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = y_k.data[i] + 0.5 * eta + eta * sc.data[i];
    return out;
}

namespace {

LogImage ddim_step_impl(const LogImage& y_k, int k, int k_next, const ScoreModel& model,
                        const NoiseSchedule& s, double zeta, RandomSource* rng) {
    check_step_range("ddim_step", k, s);
    if (k_next < 0 || k_next >= k)
        throw std::out_of_range("ddim_step: target step " + std::to_string(k_next) +
                                " not below source step " + std::to_string(k));
    const double eta_k = s.eta_at(k);
    const double eta_n = s.eta_at(k_next);
    if (zeta * zeta > eta_n)
        throw std::invalid_argument("ddim_step: zeta^2 = " + std::to_string(zeta * zeta) +
                                    " exceeds eta(" + std::to_string(k_next) + ") = " +
                                    std::to_string(eta_n) + " at step k = " + std::to_string(k));
    const Volume sc = model.evaluate(y_k, k);
    const double dir = std::sqrt(eta_n - zeta * zeta) / std::sqrt(eta_k);
    LogImage out = like(y_k);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double y0 = y_k.data[i] + 0.5 * eta_k + eta_k * sc.data[i];
        out.data[i] = y0 - 0.5 * eta_n + dir * (y_k.data[i] - y0 + 0.5 * eta_k);
    }
    if (zeta > 0.0) {
        for (double& v : out.data) v += zeta * rng->gaussian();
    }
    return out;
}

double zeta_for(const SamplerConfig& cfg, int k, const char* fn) {
    if (cfg.zeta.empty()) return 0.0;
    if (static_cast<int>(cfg.zeta.size()) <= k)
        throw std::invalid_argument(std::string(fn) + ": zeta table has " +
                                    std::to_string(cfg.zeta.size()) +
                                    " entries, too short for step " + std::to_string(k));
    return cfg.zeta[static_cast<std::size_t>(k)];
}

std::vector<int> ddim_ladder(const SamplerConfig& cfg, const NoiseSchedule& s) {
    std::vector<int> ks;
    if (cfg.ddim_steps.empty()) {
        for (int k = cfg.k_start; k >= 1; --k) ks.push_back(k);
        return ks;
    }
    ks = cfg.ddim_steps;
    if (ks.front() != cfg.k_start)
        throw ContractError("denoise: ddim_steps must begin at k_start = " +
                            std::to_string(cfg.k_start) + ", got " + std::to_string(ks.front()));
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] < 1 || ks[i] > s.K)
            throw std::out_of_range("denoise: ddim step " + std::to_string(ks[i]) +
                                    " outside 1.." + std::to_string(s.K));
        if (i > 0 && ks[i] >= ks[i - 1])
            throw ContractError("denoise: ddim_steps must be strictly decreasing");
    }
    return ks;
}

} // namespace

LogImage ddim_step_to(const LogImage& y_k, int k, int k_next, const ScoreModel& model,
                      const NoiseSchedule& s, double zeta, RandomSource& rng) {
    return ddim_step_impl(y_k, k, k_next, model, s, zeta, &rng);
}

LogImage ddim_step(const LogImage& y_k, int k, const ScoreModel& model, const NoiseSchedule& s,
                   const SamplerConfig& cfg, RandomSource& rng) {
    check_step_range("ddim_step", k, s);
    return ddim_step_impl(y_k, k, k - 1, model, s, zeta_for(cfg, k, "ddim_step"), &rng);
}

LogImage denoise_log(const LogImage& y_start, const ScoreModel& model, const NoiseSchedule& s,
                     const SamplerConfig& cfg, RandomSource& rng) {
    if (cfg.k_start < 0)
        throw std::out_of_range("denoise: k_start = " + std::to_string(cfg.k_start));
    if (cfg.k_start > s.K) {
        // Report in level units: the schedule extended at its final rate.
        const double requested = s.max_level() + (cfg.k_start - s.K) * s.increment(s.K);
        throw LevelUnreachableError(requested, s.max_level());
    }
    if (cfg.k_start == 0) return y_start;

    LogImage y = y_start;
    switch (cfg.method) {
    case SamplerMethod::stochastic:
        for (int k = cfg.k_start; k >= 1; --k) y = stochastic_step(y, k, model, s, rng);
        return y;
    case SamplerMethod::ode:
        for (int k = cfg.k_start; k >= 1; --k) y = ode_step(y, k, model, s);
        return y;
    case SamplerMethod::ddim: {
        const std::vector<int> ks = ddim_ladder(cfg, s);
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const int k_next = (i + 1 < ks.size()) ? ks[i + 1] : 0;
            y = ddim_step_impl(y, ks[i], k_next, model, s, zeta_for(cfg, ks[i], "denoise"), &rng);
        }
        return y;
    }
    }
    throw ContractError("denoise: bad sampler method enum");
}

ImageTensor denoise(const ImageTensor& x_noisy, const ScoreModel& model, const NoiseSchedule& s,
                    const SamplerConfig& cfg, RandomSource& rng) {
    for (double v : x_noisy.data)
        if (!(v > 0.0))
            throw std::domain_error("denoise: intensities must be strictly positive");
    if (cfg.k_start == 0) return x_noisy;
    const LogImage y = log_image(x_noisy);
    return exp_image(denoise_log(y, model, s, cfg, rng));
}

} // namespace gbmd

#pragma once

#include <string>
#include <vector>

#include "gbmd/image.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/schedule.hpp"
#include "gbmd/score.hpp"

namespace gbmd {

enum class SamplerMethod { stochastic, ode, ddim };

SamplerMethod sampler_method_from_name(const std::string& name);
std::string sampler_method_name(SamplerMethod m);

struct SamplerConfig {
    SamplerMethod method = SamplerMethod::ode;
    // Per-step noise scale for ddim, indexed by k; empty means all zeros
    // (deterministic). Requires zeta[k]^2 <= eta(k-1) wherever used.
    std::vector<double> zeta;
    int k_start = 0;
    // Optional strictly decreasing subsequence of steps for ddim; empty
    // visits every step. When set, the first entry must equal k_start.
    std::vector<int> ddim_steps;
};

// One reverse Euler-Maruyama update: y + Delta/2 * (1 + 2 s(y, k)) + sqrt(Delta) n.
LogImage stochastic_step(const LogImage& y_k, int k, const ScoreModel& model,
                         const NoiseSchedule& s, RandomSource& rng);
LogImage stochastic_step_with_noise(const LogImage& y_k, int k, const ScoreModel& model,
                                    const NoiseSchedule& s, const Volume& n);

// Probability-flow update: y + Delta/2 * (1 + s(y, k)). Deterministic.
LogImage ode_step(const LogImage& y_k, int k, const ScoreModel& model, const NoiseSchedule& s);

// Best clean-image estimate from step k: y + eta(k)/2 + eta(k) * s(y, k).
// k = 0 returns y unchanged.
LogImage predict_y0(const LogImage& y_k, int k, const ScoreModel& model, const NoiseSchedule& s);

// Non-Markov jump k -> k_next < k through the predicted y0:
//   y0_hat - eta(k_next)/2
//   + sqrt(eta(k_next) - zeta^2)/sqrt(eta(k)) * (y - y0_hat + eta(k)/2)
//   + zeta * n (n drawn only when zeta > 0).
LogImage ddim_step_to(const LogImage& y_k, int k, int k_next, const ScoreModel& model,
                      const NoiseSchedule& s, double zeta, RandomSource& rng);

// The single-step form, k -> k-1, with zeta taken from cfg.
LogImage ddim_step(const LogImage& y_k, int k, const ScoreModel& model, const NoiseSchedule& s,
                   const SamplerConfig& cfg, RandomSource& rng);

// Full reverse pass in the log domain from cfg.k_start down to 0.
LogImage denoise_log(const LogImage& y_start, const ScoreModel& model, const NoiseSchedule& s,
                     const SamplerConfig& cfg, RandomSource& rng);

// Intensity-domain wrapper: log, reverse pass, exp. k_start = 0 returns the
// input unchanged. Output is not clamped; export handles range.
ImageTensor denoise(const ImageTensor& x_noisy, const ScoreModel& model, const NoiseSchedule& s,
                    const SamplerConfig& cfg, RandomSource& rng);

} // namespace gbmd

#pragma once

#include <vector>

namespace gbmd {

// Discrete noise schedule. eta[k] is the cumulative variance accumulated by
// step k; every forward kernel, score and sampler consumes the schedule only
// through eta and its per-step increments. Precomputed as an array so
// non-linear schedules can be introduced without touching the samplers.
//
// Invariants: eta[0] == 0 and eta is strictly increasing for k >= 1.
struct NoiseSchedule {
    int K = 0;               // total diffusion steps
    std::vector<double> eta; // length K + 1

    double eta_at(int k) const;                // bounds-checked lookup
    double increment(int k) const;             // eta[k] - eta[k-1], k in 1..K
    double max_level() const { return eta.back(); }
};

// Linear-in-cumulative-variance schedule: eta[k] = k * eta_per_step. The
// defaults (K = 500, eta_per_step = 4e-4) place variance levels
// 0.04 / 0.08 / 0.12 at steps 100 / 200 / 300.
NoiseSchedule build_linear_schedule(int K, double eta_per_step);

inline constexpr int kDefaultSteps = 500;
inline constexpr double kDefaultEtaPerStep = 4e-4;

// Smallest k such that eta[k] >= level. Throws LevelUnreachableError when the
// level exceeds eta[K].
int step_for_noise_level(const NoiseSchedule& s, double level);

} // namespace gbmd

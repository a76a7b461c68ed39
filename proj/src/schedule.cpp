#include "gbmd/schedule.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

double NoiseSchedule::eta_at(int k) const {
    if (k < 0 || k > K) {
        throw std::out_of_range("NoiseSchedule: step " + std::to_string(k) + " outside 0.." +
                                std::to_string(K));
    }
    return eta[static_cast<std::size_t>(k)];
}

double NoiseSchedule::increment(int k) const {
    if (k < 1 || k > K) {
        throw std::out_of_range("NoiseSchedule: increment index " + std::to_string(k) +
                                " outside 1.." + std::to_string(K));
    }
    return eta[static_cast<std::size_t>(k)] - eta[static_cast<std::size_t>(k) - 1];
}

NoiseSchedule build_linear_schedule(int K, double eta_per_step) {
    if (K < 1) {
        throw std::invalid_argument("build_linear_schedule: K must be >= 1");
    }
    if (!(eta_per_step > 0.0)) {
        throw std::invalid_argument("build_linear_schedule: eta_per_step must be positive");
    }
    NoiseSchedule s;
    s.K = K;
    s.eta.resize(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) {
        s.eta[static_cast<std::size_t>(k)] = static_cast<double>(k) * eta_per_step;
    }
    return s;
}

int step_for_noise_level(const NoiseSchedule& s, double level) {
    if (level < 0.0) {
        throw std::invalid_argument("step_for_noise_level: level must be >= 0");
    }
    if (level > s.max_level()) {
        throw LevelUnreachableError(level, s.max_level());
    }
    auto it = std::lower_bound(s.eta.begin(), s.eta.end(), level);
    return static_cast<int>(it - s.eta.begin());
}

} // namespace gbmd

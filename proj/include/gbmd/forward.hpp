#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gbmd/image.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/schedule.hpp"

namespace gbmd {

// One corruption event: the corrupted log-domain state together with the
// Gaussian draw that produced it. The draw is kept so the training loss can
// be formed without re-deriving noise from states, which cancels badly when
// eta is small.
//
// Reconstruction identity: y_k == y0 - eta(k)/2 + sqrt(eta(k)) * noise,
// elementwise and exact in floating point.
struct ForwardSample {
    LogImage y_k;
    Volume noise;  // the standard normal draw n_k
    int k = 0;
    Volume factor; // multiplicative realization exp(-eta/2 + sqrt(eta) n)
};

// Single-shot corruption in the log domain: y_k = y0 - eta(k)/2 + sqrt(eta(k)) n,
// n ~ N(0, I). The _with_noise variant takes the draw explicitly and is the
// deterministic core the rng version delegates to.
ForwardSample corrupt_log(const LogImage& y0, int k, const NoiseSchedule& s, RandomSource& rng);
ForwardSample corrupt_log_with_noise(const LogImage& y0, int k, const NoiseSchedule& s,
                                     Volume noise);

// Closed-form multiplicative corruption of intensities. Computed as
// exp(corrupt_log(log x0)) so the log/intensity routes commute bit-for-bit.
// Corrupted intensities may exceed 1; they are not clamped here.
std::pair<ImageTensor, ForwardSample> corrupt_intensity(const ImageTensor& x0, int k,
                                                        const NoiseSchedule& s,
                                                        RandomSource& rng);
std::pair<ImageTensor, ForwardSample> corrupt_intensity_with_noise(const ImageTensor& x0, int k,
                                                                   const NoiseSchedule& s,
                                                                   Volume noise);

// Per-step path simulation of the same process, one Gaussian increment per
// step. Distributionally equivalent to corrupt_log; kept as an independent
// route for the equivalence checks.
LogImage simulate_forward_path(const LogImage& y0, int k, const NoiseSchedule& s,
                               RandomSource& rng);
LogImage simulate_forward_path_with_noise(const LogImage& y0, int k, const NoiseSchedule& s,
                                          std::span<const Volume> per_step_noise);

} // namespace gbmd

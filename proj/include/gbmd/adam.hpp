#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gbmd/net.hpp"
#include "gbmd/tensor.hpp"

namespace gbmd {

// Rounds every entry to the nearest 32-bit float. Parameters live in 64-bit
// buffers but are constrained to the 32-bit grid after init and after every
// optimizer step, so checkpoints (which store 32-bit blobs) round-trip
// without loss.
void quantize_f32(std::vector<double>& v);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::int64_t t = 0;

    static AdamState init(std::span<const NamedParam> params);
};

// Standard bias-corrected Adam update, applied in place to the parameter
// leaves; gradients are read from the tape and left untouched.
void adam_step(Tape& tape, std::span<const NamedParam> params, AdamState& state,
               const AdamConfig& cfg);

} // namespace gbmd

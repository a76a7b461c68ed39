#pragma once

#include "gbmd/tensor.hpp"

namespace gbmd {

// Differentiable primitives. Every op validates shapes up front (ShapeError
// names the offending primitive), computes the forward value, and records a
// backward closure when any input tracks gradients.

Tensor op_add(Tape& t, const Tensor& a, const Tensor& b);
Tensor op_sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor op_mul(Tape& t, const Tensor& a, const Tensor& b);

// a: [N, I], b: [I, O] -> [N, O]
Tensor op_matmul(Tape& t, const Tensor& a, const Tensor& b);

// x: [N, Ci, H, W], w: [Co, Ci, 3, 3], b: [Co] -> [N, Co, H, W]
// stride 1, zero padding 1.
Tensor op_conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b);

// x: [N, C, H, W] with even H, W -> [N, C, H/2, W/2]
Tensor op_avgpool2(Tape& t, const Tensor& x);

// x: [N, C, H, W] -> [N, C, 2H, 2W], nearest neighbour.
Tensor op_upsample2(Tape& t, const Tensor& x);

Tensor op_silu(Tape& t, const Tensor& x);
Tensor op_relu(Tape& t, const Tensor& x);

// Per-sample, per-channel normalization over the spatial extent, then a
// learned per-channel affine. x: [N, C, H, W], gain/bias: [C].
Tensor op_channel_norm(Tape& t, const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);

// x: [N, O] + b: [O], broadcast over rows.
Tensor op_broadcast_add_rows(Tape& t, const Tensor& x, const Tensor& b);

// x: [N, C, H, W] + e: [N, C], broadcast over the spatial extent.
Tensor op_broadcast_add_channels(Tape& t, const Tensor& x, const Tensor& e);

Tensor op_sum(Tape& t, const Tensor& x);
Tensor op_mean(Tape& t, const Tensor& x);
Tensor op_square(Tape& t, const Tensor& x);

} // namespace gbmd

#include "gbmd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {
namespace {

void require_same_shape(const char* prim, const Tensor& a, const Tensor& b) {
    if (!(a.shape == b.shape)) {
        throw ShapeError(std::string(prim) + ": operand shapes " + a.shape.str() + " and " +
                         b.shape.str() + " differ");
    }
}

void require_rank(const char* prim, const Tensor& x, int rank) {
    if (x.shape.rank() != rank) {
        throw ShapeError(std::string(prim) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + x.shape.str());
    }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Tensor elementwise_binary(Tape& t, const char* prim, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double), Tape::BackFn backfn) {
    require_same_shape(prim, a, b);
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.record(a.shape, std::move(out), rg, std::move(backfn));
}

} // namespace

Tensor op_add(Tape& t, const Tensor& a, const Tensor& b) {
    const int aid = a.id, bid = b.id;
    return elementwise_binary(
        t, "add", a, b, [](double x, double y) { return x + y; },
        [aid, bid](Tape& tp, int self) {
            const auto& g = tp.grad_of(self);
            for (int id : {aid, bid}) {
                if (!tp.tracks(id)) continue;
                auto& acc = tp.grad_accum(id);
                for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
            }
        });
}

Tensor op_sub(Tape& t, const Tensor& a, const Tensor& b) {
    const int aid = a.id, bid = b.id;
    return elementwise_binary(
        t, "sub", a, b, [](double x, double y) { return x - y; },
        [aid, bid](Tape& tp, int self) {
            const auto& g = tp.grad_of(self);
            if (tp.tracks(aid)) {
                auto& ga = tp.grad_accum(aid);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (tp.tracks(bid)) {
                auto& gb = tp.grad_accum(bid);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
}

Tensor op_mul(Tape& t, const Tensor& a, const Tensor& b) {
    const int aid = a.id, bid = b.id;
    return elementwise_binary(
        t, "mul", a, b, [](double x, double y) { return x * y; },
        [aid, bid](Tape& tp, int self) {
            const auto& g = tp.grad_of(self);
            if (tp.tracks(aid)) {
                auto& ga = tp.grad_accum(aid);
                const auto& bv = tp.value_of(bid);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
            }
            if (tp.tracks(bid)) {
                auto& gb = tp.grad_accum(bid);
                const auto& av = tp.value_of(aid);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
            }
        });
}

Tensor op_matmul(Tape& t, const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const int N = a.shape.dims[0], I = a.shape.dims[1];
    const int I2 = b.shape.dims[0], O = b.shape.dims[1];
    if (I != I2) {
        throw ShapeError("matmul: inner dimensions differ, " + a.shape.str() + " vs " +
                         b.shape.str());
    }
    const auto& av = t.value(a);
    const auto& bv = t.value(b);
    std::vector<double> out(static_cast<std::size_t>(N) * O, 0.0);
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i < I; ++i) {
            const double av_ni = av[static_cast<std::size_t>(n) * I + i];
            const double* brow = bv.data() + static_cast<std::size_t>(i) * O;
            double* orow = out.data() + static_cast<std::size_t>(n) * O;
            for (int o = 0; o < O; ++o) orow[o] += av_ni * brow[o];
        }
    }
    const bool rg = t.requires_grad(a) || t.requires_grad(b);
    const int aid = a.id, bid = b.id;
    return t.record({{N, O}}, std::move(out), rg, [aid, bid, N, I, O](Tape& tp, int self) {
        const auto& g = tp.grad_of(self);
        if (tp.tracks(aid)) {
            auto& ga = tp.grad_accum(aid);
            const auto& bv = tp.value_of(bid);
            for (int n = 0; n < N; ++n) {
                for (int i = 0; i < I; ++i) {
                    double acc = 0.0;
                    const double* grow = g.data() + static_cast<std::size_t>(n) * O;
                    const double* brow = bv.data() + static_cast<std::size_t>(i) * O;
                    for (int o = 0; o < O; ++o) acc += grow[o] * brow[o];
                    ga[static_cast<std::size_t>(n) * I + i] += acc;
                }
            }
        }
        if (tp.tracks(bid)) {
            auto& gb = tp.grad_accum(bid);
            const auto& av = tp.value_of(aid);
            for (int n = 0; n < N; ++n) {
                const double* grow = g.data() + static_cast<std::size_t>(n) * O;
                for (int i = 0; i < I; ++i) {
                    const double av_ni = av[static_cast<std::size_t>(n) * I + i];
                    double* brow = gb.data() + static_cast<std::size_t>(i) * O;
                    for (int o = 0; o < O; ++o) brow[o] += av_ni * grow[o];
                }
            }
        }
    });
}

Tensor op_conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank("conv2d", x, 4);
    require_rank("conv2d", w, 4);
    require_rank("conv2d", b, 1);
    const int N = x.shape.dims[0], Ci = x.shape.dims[1], H = x.shape.dims[2],
              W = x.shape.dims[3];
    const int Co = w.shape.dims[0];
    if (w.shape.dims[1] != Ci || w.shape.dims[2] != 3 || w.shape.dims[3] != 3) {
        throw ShapeError("conv2d: kernel " + w.shape.str() + " does not match input " +
                         x.shape.str() + " (expect [Co, " + std::to_string(Ci) + ", 3, 3])");
    }
    if (b.shape.dims[0] != Co) {
        throw ShapeError("conv2d: bias " + b.shape.str() + " does not match out channels " +
                         std::to_string(Co));
    }
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    const auto& bv = t.value(b);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::vector<double> out(static_cast<std::size_t>(N) * Co * plane);
    for (int n = 0; n < N; ++n) {
        for (int co = 0; co < Co; ++co) {
            double* op = out.data() + (static_cast<std::size_t>(n) * Co + co) * plane;
            std::fill(op, op + plane, bv[co]);
            for (int ci = 0; ci < Ci; ++ci) {
                const double* xp = xv.data() + (static_cast<std::size_t>(n) * Ci + ci) * plane;
                const double* wp = wv.data() + (static_cast<std::size_t>(co) * Ci + ci) * 9;
                for (int ki = 0; ki < 3; ++ki) {
                    const int di = ki - 1;
                    for (int kj = 0; kj < 3; ++kj) {
                        const int dj = kj - 1;
                        const double wt = wp[ki * 3 + kj];
                        const int jlo = std::max(0, -dj);
                        const int jhi = std::min(W, W - dj);
                        for (int i = 0; i < H; ++i) {
                            const int ii = i + di;
                            if (ii < 0 || ii >= H) continue;
                            const double* xrow = xp + static_cast<std::size_t>(ii) * W + dj;
                            double* orow = op + static_cast<std::size_t>(i) * W;
                            for (int j = jlo; j < jhi; ++j) orow[j] += wt * xrow[j];
                        }
                    }
                }
            }
        }
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(w) || t.requires_grad(b);
    const int xid = x.id, wid = w.id, bid = b.id;
    return t.record(
        {{N, Co, H, W}}, std::move(out), rg,
        [xid, wid, bid, N, Ci, Co, H, W, plane](Tape& tp, int self) {
            const auto& g = tp.grad_of(self);
            const auto& xv = tp.value_of(xid);
            const auto& wv = tp.value_of(wid);
            if (tp.tracks(bid)) {
                auto& db = tp.grad_accum(bid);
                for (int n = 0; n < N; ++n) {
                    for (int co = 0; co < Co; ++co) {
                        const double* gp =
                            g.data() + (static_cast<std::size_t>(n) * Co + co) * plane;
                        double acc = 0.0;
                        for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
                        db[co] += acc;
                    }
                }
            }
            if (tp.tracks(wid)) {
                auto& dw = tp.grad_accum(wid);
                for (int n = 0; n < N; ++n) {
                    for (int co = 0; co < Co; ++co) {
                        const double* gp =
                            g.data() + (static_cast<std::size_t>(n) * Co + co) * plane;
                        for (int ci = 0; ci < Ci; ++ci) {
                            const double* xp =
                                xv.data() + (static_cast<std::size_t>(n) * Ci + ci) * plane;
                            double* dwp =
                                dw.data() + (static_cast<std::size_t>(co) * Ci + ci) * 9;
                            for (int ki = 0; ki < 3; ++ki) {
                                const int di = ki - 1;
                                for (int kj = 0; kj < 3; ++kj) {
                                    const int dj = kj - 1;
                                    const int jlo = std::max(0, -dj);
                                    const int jhi = std::min(W, W - dj);
                                    double acc = 0.0;
                                    for (int i = 0; i < H; ++i) {
                                        const int ii = i + di;
                                        if (ii < 0 || ii >= H) continue;
                                        const double* xrow =
                                            xp + static_cast<std::size_t>(ii) * W + dj;
                                        const double* grow =
                                            gp + static_cast<std::size_t>(i) * W;
                                        for (int j = jlo; j < jhi; ++j) acc += grow[j] * xrow[j];
                                    }
                                    dwp[ki * 3 + kj] += acc;
                                }
                            }
                        }
                    }
                }
            }
            if (tp.tracks(xid)) {
                auto& dx = tp.grad_accum(xid);
                for (int n = 0; n < N; ++n) {
                    for (int ci = 0; ci < Ci; ++ci) {
                        double* dxp =
                            dx.data() + (static_cast<std::size_t>(n) * Ci + ci) * plane;
                        for (int co = 0; co < Co; ++co) {
                            const double* gp =
                                g.data() + (static_cast<std::size_t>(n) * Co + co) * plane;
                            const double* wp =
                                wv.data() + (static_cast<std::size_t>(co) * Ci + ci) * 9;
                            for (int ki = 0; ki < 3; ++ki) {
                                const int di = ki - 1;
                                for (int kj = 0; kj < 3; ++kj) {
                                    const int dj = kj - 1;
                                    const double wt = wp[ki * 3 + kj];
                                    const int jlo = std::max(0, -dj);
                                    const int jhi = std::min(W, W - dj);
                                    for (int i = 0; i < H; ++i) {
                                        const int ii = i + di;
                                        if (ii < 0 || ii >= H) continue;
                                        double* dxrow =
                                            dxp + static_cast<std::size_t>(ii) * W + dj;
                                        const double* grow =
                                            gp + static_cast<std::size_t>(i) * W;
                                        for (int j = jlo; j < jhi; ++j) dxrow[j] += wt * grow[j];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
}

Tensor op_avgpool2(Tape& t, const Tensor& x) {
    require_rank("avgpool2", x, 4);
    const int N = x.shape.dims[0], C = x.shape.dims[1], H = x.shape.dims[2], W = x.shape.dims[3];
    if (H % 2 != 0 || W % 2 != 0) {
        throw ShapeError("avgpool2: spatial dims must be even, got " + x.shape.str());
    }
    const int Ho = H / 2, Wo = W / 2;
    const auto& xv = t.value(x);
    std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
    const std::size_t planes = static_cast<std::size_t>(N) * C;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* xp = xv.data() + p * H * W;
        double* op = out.data() + p * Ho * Wo;
        for (int i = 0; i < Ho; ++i) {
            for (int j = 0; j < Wo; ++j) {
                const double* r0 = xp + static_cast<std::size_t>(2 * i) * W + 2 * j;
                const double* r1 = r0 + W;
                op[static_cast<std::size_t>(i) * Wo + j] =
                    0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
        }
    }
    const int xid = x.id;
    return t.record({{N, C, Ho, Wo}}, std::move(out), t.requires_grad(x),
                    [xid, planes, H, W, Ho, Wo](Tape& tp, int self) {
                        if (!tp.tracks(xid)) return;
                        const auto& g = tp.grad_of(self);
                        auto& dx = tp.grad_accum(xid);
                        for (std::size_t p = 0; p < planes; ++p) {
                            const double* gp = g.data() + p * Ho * Wo;
                            double* dxp = dx.data() + p * H * W;
                            for (int i = 0; i < Ho; ++i) {
                                for (int j = 0; j < Wo; ++j) {
                                    const double q =
                                        0.25 * gp[static_cast<std::size_t>(i) * Wo + j];
                                    double* r0 = dxp + static_cast<std::size_t>(2 * i) * W + 2 * j;
                                    double* r1 = r0 + W;
                                    r0[0] += q;
                                    r0[1] += q;
                                    r1[0] += q;
                                    r1[1] += q;
                                }
                            }
                        }
                    });
}

Tensor op_upsample2(Tape& t, const Tensor& x) {
    require_rank("nearest_upsample2", x, 4);
    const int N = x.shape.dims[0], C = x.shape.dims[1], H = x.shape.dims[2], W = x.shape.dims[3];
    const int Ho = 2 * H, Wo = 2 * W;
    const auto& xv = t.value(x);
    std::vector<double> out(static_cast<std::size_t>(N) * C * Ho * Wo);
    const std::size_t planes = static_cast<std::size_t>(N) * C;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* xp = xv.data() + p * H * W;
        double* op = out.data() + p * Ho * Wo;
        for (int i = 0; i < H; ++i) {
            for (int j = 0; j < W; ++j) {
                const double v = xp[static_cast<std::size_t>(i) * W + j];
                double* r0 = op + static_cast<std::size_t>(2 * i) * Wo + 2 * j;
                double* r1 = r0 + Wo;
                r0[0] = v;
                r0[1] = v;
                r1[0] = v;
                r1[1] = v;
            }
        }
    }
    const int xid = x.id;
    return t.record({{N, C, Ho, Wo}}, std::move(out), t.requires_grad(x),
                    [xid, planes, H, W, Wo, Ho](Tape& tp, int self) {
                        if (!tp.tracks(xid)) return;
                        const auto& g = tp.grad_of(self);
                        auto& dx = tp.grad_accum(xid);
                        for (std::size_t p = 0; p < planes; ++p) {
                            const double* gp = g.data() + p * Ho * Wo;
                            double* dxp = dx.data() + p * H * W;
                            for (int i = 0; i < H; ++i) {
                                for (int j = 0; j < W; ++j) {
                                    const double* r0 =
                                        gp + static_cast<std::size_t>(2 * i) * Wo + 2 * j;
                                    const double* r1 = r0 + Wo;
                                    dxp[static_cast<std::size_t>(i) * W + j] +=
                                        r0[0] + r0[1] + r1[0] + r1[1];
                                }
                            }
                        }
                    });
}

Tensor op_silu(Tape& t, const Tensor& x) {
    const auto& xv = t.value(x);
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sigmoid(xv[i]);
    const int xid = x.id;
    return t.record(x.shape, std::move(out), t.requires_grad(x), [xid](Tape& tp, int self) {
        if (!tp.tracks(xid)) return;
        const auto& g = tp.grad_of(self);
        const auto& xv = tp.value_of(xid);
        auto& dx = tp.grad_accum(xid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = sigmoid(xv[i]);
            dx[i] += g[i] * s * (1.0 + xv[i] * (1.0 - s));
        }
    });
}

Tensor op_relu(Tape& t, const Tensor& x) {
    const auto& xv = t.value(x);
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    const int xid = x.id;
    return t.record(x.shape, std::move(out), t.requires_grad(x), [xid](Tape& tp, int self) {
        if (!tp.tracks(xid)) return;
        const auto& g = tp.grad_of(self);
        const auto& xv = tp.value_of(xid);
        auto& dx = tp.grad_accum(xid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) dx[i] += g[i];
        }
    });
}

Tensor op_channel_norm(Tape& t, const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps) {
    require_rank("channel_norm", x, 4);
    require_rank("channel_norm", gain, 1);
    require_rank("channel_norm", bias, 1);
    const int N = x.shape.dims[0], C = x.shape.dims[1], H = x.shape.dims[2], W = x.shape.dims[3];
    if (gain.shape.dims[0] != C || bias.shape.dims[0] != C) {
        throw ShapeError("channel_norm: affine shapes " + gain.shape.str() + "/" +
                         bias.shape.str() + " do not match channels " + std::to_string(C));
    }
    const auto& xv = t.value(x);
    const auto& gv = t.value(gain);
    const auto& bv = t.value(bias);
    const std::size_t M = static_cast<std::size_t>(H) * W;
    std::vector<double> out(xv.size());
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* xp = xv.data() + (static_cast<std::size_t>(n) * C + c) * M;
            double* op = out.data() + (static_cast<std::size_t>(n) * C + c) * M;
            double mu = 0.0;
            for (std::size_t i = 0; i < M; ++i) mu += xp[i];
            mu /= static_cast<double>(M);
            double var = 0.0;
            for (std::size_t i = 0; i < M; ++i) var += (xp[i] - mu) * (xp[i] - mu);
            var /= static_cast<double>(M);
            const double inv = 1.0 / std::sqrt(var + eps);
            const double gc = gv[c], bc = bv[c];
            for (std::size_t i = 0; i < M; ++i) op[i] = (xp[i] - mu) * inv * gc + bc;
        }
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(gain) || t.requires_grad(bias);
    const int xid = x.id, gid = gain.id, bid = bias.id;
    return t.record(
        x.shape, std::move(out), rg, [xid, gid, bid, N, C, M, eps](Tape& tp, int self) {
            const auto& g = tp.grad_of(self);
            const auto& xv = tp.value_of(xid);
            const auto& gv = tp.value_of(gid);
            const bool track_x = tp.tracks(xid);
            const bool track_gain = tp.tracks(gid);
            const bool track_bias = tp.tracks(bid);
            std::vector<double> xhat(M);
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * M;
                    const double* xp = xv.data() + base;
                    const double* gp = g.data() + base;
                    double mu = 0.0;
                    for (std::size_t i = 0; i < M; ++i) mu += xp[i];
                    mu /= static_cast<double>(M);
                    double var = 0.0;
                    for (std::size_t i = 0; i < M; ++i) var += (xp[i] - mu) * (xp[i] - mu);
                    var /= static_cast<double>(M);
                    const double inv = 1.0 / std::sqrt(var + eps);
                    for (std::size_t i = 0; i < M; ++i) xhat[i] = (xp[i] - mu) * inv;
                    if (track_gain) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < M; ++i) acc += gp[i] * xhat[i];
                        tp.grad_accum(gid)[c] += acc;
                    }
                    if (track_bias) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < M; ++i) acc += gp[i];
                        tp.grad_accum(bid)[c] += acc;
                    }
                    if (track_x) {
                        auto& dx = tp.grad_accum(xid);
                        const double gc = gv[c];
                        double s1 = 0.0, s2 = 0.0;
                        for (std::size_t i = 0; i < M; ++i) {
                            const double dxh = gp[i] * gc;
                            s1 += dxh;
                            s2 += dxh * xhat[i];
                        }
                        const double m = static_cast<double>(M);
                        double* dxp = dx.data() + base;
                        for (std::size_t i = 0; i < M; ++i) {
                            const double dxh = gp[i] * gc;
                            dxp[i] += inv * (dxh - s1 / m - xhat[i] * s2 / m);
                        }
                    }
                }
            }
        });
}

Tensor op_broadcast_add_rows(Tape& t, const Tensor& x, const Tensor& b) {
    require_rank("broadcast_add_rows", x, 2);
    require_rank("broadcast_add_rows", b, 1);
    const int N = x.shape.dims[0], O = x.shape.dims[1];
    if (b.shape.dims[0] != O) {
        throw ShapeError("broadcast_add_rows: bias " + b.shape.str() + " does not match row " +
                         x.shape.str());
    }
    const auto& xv = t.value(x);
    const auto& bv = t.value(b);
    std::vector<double> out(xv.size());
    for (int n = 0; n < N; ++n) {
        for (int o = 0; o < O; ++o) {
            out[static_cast<std::size_t>(n) * O + o] =
                xv[static_cast<std::size_t>(n) * O + o] + bv[o];
        }
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(b);
    const int xid = x.id, bid = b.id;
    return t.record(x.shape, std::move(out), rg, [xid, bid, N, O](Tape& tp, int self) {
        const auto& g = tp.grad_of(self);
        if (tp.tracks(xid)) {
            auto& dx = tp.grad_accum(xid);
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (tp.tracks(bid)) {
            auto& db = tp.grad_accum(bid);
            for (int n = 0; n < N; ++n) {
                const double* grow = g.data() + static_cast<std::size_t>(n) * O;
                for (int o = 0; o < O; ++o) db[o] += grow[o];
            }
        }
    });
}

Tensor op_broadcast_add_channels(Tape& t, const Tensor& x, const Tensor& e) {
    require_rank("broadcast_add_channels", x, 4);
    require_rank("broadcast_add_channels", e, 2);
    const int N = x.shape.dims[0], C = x.shape.dims[1], H = x.shape.dims[2], W = x.shape.dims[3];
    if (e.shape.dims[0] != N || e.shape.dims[1] != C) {
        throw ShapeError("broadcast_add_channels: embedding " + e.shape.str() +
                         " does not match feature map " + x.shape.str());
    }
    const auto& xv = t.value(x);
    const auto& ev = t.value(e);
    const std::size_t M = static_cast<std::size_t>(H) * W;
    std::vector<double> out(xv.size());
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * M;
            const double ec = ev[static_cast<std::size_t>(n) * C + c];
            for (std::size_t i = 0; i < M; ++i) out[base + i] = xv[base + i] + ec;
        }
    }
    const bool rg = t.requires_grad(x) || t.requires_grad(e);
    const int xid = x.id, eid = e.id;
    return t.record(x.shape, std::move(out), rg, [xid, eid, N, C, M](Tape& tp, int self) {
        const auto& g = tp.grad_of(self);
        if (tp.tracks(xid)) {
            auto& dx = tp.grad_accum(xid);
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
        }
        if (tp.tracks(eid)) {
            auto& de = tp.grad_accum(eid);
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * M;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < M; ++i) acc += g[base + i];
                    de[static_cast<std::size_t>(n) * C + c] += acc;
                }
            }
        }
    });
}

Tensor op_sum(Tape& t, const Tensor& x) {
    const auto& xv = t.value(x);
    double acc = 0.0;
    for (double v : xv) acc += v;
    const int xid = x.id;
    return t.record({{}}, {acc}, t.requires_grad(x), [xid](Tape& tp, int self) {
        if (!tp.tracks(xid)) return;
        const double g0 = tp.grad_of(self)[0];
        auto& dx = tp.grad_accum(xid);
        for (double& v : dx) v += g0;
    });
}

Tensor op_mean(Tape& t, const Tensor& x) {
    const auto& xv = t.value(x);
    if (xv.empty()) {
        throw ShapeError("mean: empty tensor");
    }
    double acc = 0.0;
    for (double v : xv) acc += v;
    acc /= static_cast<double>(xv.size());
    const int xid = x.id;
    const double scale = 1.0 / static_cast<double>(xv.size());
    return t.record({{}}, {acc}, t.requires_grad(x), [xid, scale](Tape& tp, int self) {
        if (!tp.tracks(xid)) return;
        const double g0 = tp.grad_of(self)[0] * scale;
        auto& dx = tp.grad_accum(xid);
        for (double& v : dx) v += g0;
    });
}

Tensor op_square(Tape& t, const Tensor& x) {
    const auto& xv = t.value(x);
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * xv[i];
    const int xid = x.id;
    return t.record(x.shape, std::move(out), t.requires_grad(x), [xid](Tape& tp, int self) {
        if (!tp.tracks(xid)) return;
        const auto& g = tp.grad_of(self);
        const auto& xv = tp.value_of(xid);
        auto& dx = tp.grad_accum(xid);
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += 2.0 * xv[i] * g[i];
    });
}

} // namespace gbmd

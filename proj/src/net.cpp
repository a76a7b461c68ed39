#include "gbmd/net.hpp"

#include <cmath>
#include <stdexcept>

#include "gbmd/adam.hpp"
#include "gbmd/errors.hpp"
#include "gbmd/ops.hpp"

namespace gbmd {

std::vector<double> time_embedding(int k, int dim) {
    if (dim <= 0 || dim % 2 != 0) {
        throw std::invalid_argument("time_embedding: dim must be a positive even number, got " +
                                    std::to_string(dim));
    }
    if (k < 0) {
        throw std::invalid_argument("time_embedding: k must be >= 0, got " + std::to_string(k));
    }
    const int half = dim / 2;
    std::vector<double> emb(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double period =
            half == 1 ? 1.0 : std::pow(1e4, static_cast<double>(i) / (half - 1));
        const double angle = static_cast<double>(k) / period;
        emb[2 * static_cast<std::size_t>(i)] = std::sin(angle);
        emb[2 * static_cast<std::size_t>(i) + 1] = std::cos(angle);
    }
    return emb;
}

Volume Network::score(const LogImage& y, int k, const NoiseSchedule& s) {
    if (k < 1) {
        throw DegenerateKernelError("score: step " + std::to_string(k) +
                                    " has no positive-variance kernel");
    }
    const double root_eta = std::sqrt(s.eta_at(k));
    const std::size_t mark = tape_.size();
    Tensor eps = predict_noise_batch(std::span<const LogImage>(&y, 1),
                                     std::span<const int>(&k, 1));
    std::vector<double> vals = tape_.value(eps);
    tape_.truncate(mark);
    Volume out{y.shape, std::move(vals)};
    for (double& v : out.data) v = -v / root_eta;
    return out;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const NamedParam& p : params_) n += p.t.shape.numel();
    return n;
}

Tensor Network::add_param(const std::string& name, TensorShape shape, std::vector<double> data) {
    Tensor t = tape_.leaf(std::move(shape), std::move(data), true);
    params_.push_back({name, t});
    return t;
}

namespace {

std::vector<double> fan_in_uniform(std::size_t count, std::size_t fan_in, RandomSource& rng) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(count);
    for (double& x : v) x = a * (2.0 * rng.uniform() - 1.0);
    return v;
}

// Stacks per-sample embeddings into an [N, dim] constant.
Tensor embedding_rows(Tape& tape, std::span<const int> ks, int dim) {
    const int N = static_cast<int>(ks.size());
    std::vector<double> rows(static_cast<std::size_t>(N) * dim);
    for (int n = 0; n < N; ++n) {
        std::vector<double> e = time_embedding(ks[n], dim);
        std::copy(e.begin(), e.end(), rows.begin() + static_cast<std::size_t>(n) * dim);
    }
    return tape.constant({{N, dim}}, std::move(rows));
}

void check_batch(const char* who, std::span<const LogImage> ys, std::span<const int> ks) {
    if (ys.empty()) {
        throw ContractError(std::string(who) + ": empty batch");
    }
    if (ys.size() != ks.size()) {
        throw ContractError(std::string(who) + ": batch has " + std::to_string(ys.size()) +
                            " images but " + std::to_string(ks.size()) + " step indices");
    }
    for (std::size_t i = 1; i < ys.size(); ++i) {
        if (!(ys[i].shape == ys[0].shape)) {
            throw ShapeError(std::string(who) + ": batch images must share one shape");
        }
    }
    for (int k : ks) {
        if (k < 0) {
            throw std::invalid_argument(std::string(who) + ": negative step index");
        }
    }
}

class UNet final : public Network {
public:
    UNet(ArchDescriptor arch, RandomSource& rng) : Network(std::move(arch)) {
        const int c0 = arch_.base_channels;
        const int c1 = 2 * c0, c2 = 4 * c0;
        const int ci = arch_.in_channels;
        const int E = arch_.emb_dim;

        conv_in_ = conv_param("conv_in", ci, c0, rng);
        rb1_ = block_params("rb1", c0, E, rng);
        down1_ = conv_param("down1", c0, c1, rng);
        rb2_ = block_params("rb2", c1, E, rng);
        down2_ = conv_param("down2", c1, c2, rng);
        rbm_ = block_params("rbm", c2, E, rng);
        up1_ = conv_param("up1", c2, c1, rng);
        rb3_ = block_params("rb3", c1, E, rng);
        up2_ = conv_param("up2", c1, c0, rng);
        rb4_ = block_params("rb4", c0, E, rng);
        conv_out_ = conv_param("conv_out", c0, ci, rng, /*zero=*/true);
        seal();
    }

    Tensor predict_noise_batch(std::span<const LogImage> ys, std::span<const int> ks) override {
        check_batch("unet", ys, ks);
        const Shape3 sh = ys[0].shape;
        if (sh.channels != arch_.in_channels) {
            throw ShapeError("unet: configured for " + std::to_string(arch_.in_channels) +
                             " channels, got " + std::to_string(sh.channels));
        }
        if (sh.height % 4 != 0 || sh.width % 4 != 0) {
            throw ShapeError("unet: spatial dims must be multiples of 4, got " +
                             std::to_string(sh.height) + "x" + std::to_string(sh.width));
        }
        const int N = static_cast<int>(ys.size());
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(N) * sh.numel());
        for (const LogImage& y : ys) flat.insert(flat.end(), y.data.begin(), y.data.end());
        Tensor yt = tape_.constant({{N, sh.channels, sh.height, sh.width}}, std::move(flat));
        Tensor emb = embedding_rows(tape_, ks, arch_.emb_dim);

        Tensor h0 = op_conv2d(tape_, yt, conv_in_.w, conv_in_.b);
        Tensor h1 = res_block(rb1_, h0, emb);
        Tensor d1 = op_conv2d(tape_, op_avgpool2(tape_, h1), down1_.w, down1_.b);
        Tensor h2 = res_block(rb2_, d1, emb);
        Tensor d2 = op_conv2d(tape_, op_avgpool2(tape_, h2), down2_.w, down2_.b);
        Tensor hm = res_block(rbm_, d2, emb);
        Tensor u1 = op_conv2d(tape_, op_upsample2(tape_, hm), up1_.w, up1_.b);
        Tensor h3 = res_block(rb3_, op_add(tape_, u1, h2), emb);
        Tensor u2 = op_conv2d(tape_, op_upsample2(tape_, h3), up2_.w, up2_.b);
        Tensor h4 = res_block(rb4_, op_add(tape_, u2, h1), emb);
        return op_conv2d(tape_, h4, conv_out_.w, conv_out_.b);
    }

private:
    struct Conv {
        Tensor w, b;
    };
    struct Block {
        Tensor emb_w, emb_b, gain, bias;
        Conv conv;
    };

    Conv conv_param(const std::string& name, int cin, int cout, RandomSource& rng,
                    bool zero = false) {
        const std::size_t wn = static_cast<std::size_t>(cout) * cin * 9;
        std::vector<double> w = zero ? std::vector<double>(wn, 0.0)
                                     : fan_in_uniform(wn, static_cast<std::size_t>(cin) * 9, rng);
        Conv c;
        c.w = add_param(name + ".w", {{cout, cin, 3, 3}}, std::move(w));
        c.b = add_param(name + ".b", {{cout}}, std::vector<double>(cout, 0.0));
        return c;
    }

    Block block_params(const std::string& name, int c, int E, RandomSource& rng) {
        Block b;
        b.emb_w = add_param(name + ".emb.w", {{E, c}},
                            fan_in_uniform(static_cast<std::size_t>(E) * c, E, rng));
        b.emb_b = add_param(name + ".emb.b", {{c}}, std::vector<double>(c, 0.0));
        b.gain = add_param(name + ".norm.gain", {{c}}, std::vector<double>(c, 1.0));
        b.bias = add_param(name + ".norm.bias", {{c}}, std::vector<double>(c, 0.0));
        b.conv = conv_param(name + ".conv", c, c, rng);
        return b;
    }

    // t = h + affine(emb) per channel; t + conv(silu(norm(t))).
    Tensor res_block(const Block& blk, const Tensor& h, const Tensor& emb) {
        Tensor e = op_broadcast_add_rows(tape_, op_matmul(tape_, emb, blk.emb_w), blk.emb_b);
        Tensor t0 = op_broadcast_add_channels(tape_, h, e);
        Tensor u = op_conv2d(tape_, op_silu(tape_, op_channel_norm(tape_, t0, blk.gain, blk.bias)),
                             blk.conv.w, blk.conv.b);
        return op_add(tape_, t0, u);
    }

    Conv conv_in_, down1_, down2_, up1_, up2_, conv_out_;
    Block rb1_, rb2_, rbm_, rb3_, rb4_;
};

class MlpNet final : public Network {
public:
    MlpNet(ArchDescriptor arch, RandomSource& rng) : Network(std::move(arch)) {
        const int H = arch_.hidden, E = arch_.emb_dim;
        in_w_ = add_param("in.w", {{1, H}}, fan_in_uniform(static_cast<std::size_t>(H), 1, rng));
        emb_w_ = add_param("emb.w", {{E, H}},
                           fan_in_uniform(static_cast<std::size_t>(E) * H, E, rng));
        hidden_b_ = add_param("hidden.b", {{H}}, std::vector<double>(H, 0.0));
        out_w_ = add_param("out.w", {{H, 1}}, std::vector<double>(H, 0.0));
        out_b_ = add_param("out.b", {{1}}, std::vector<double>(1, 0.0));
        seal();
    }

    Tensor predict_noise_batch(std::span<const LogImage> ys, std::span<const int> ks) override {
        check_batch("mlp", ys, ks);
        if (ys[0].shape.numel() != 1) {
            throw ShapeError("mlp: expects scalar images, got shape [" +
                             std::to_string(ys[0].shape.channels) + ", " +
                             std::to_string(ys[0].shape.height) + ", " +
                             std::to_string(ys[0].shape.width) + "]");
        }
        const int N = static_cast<int>(ys.size());
        std::vector<double> flat(static_cast<std::size_t>(N));
        for (int n = 0; n < N; ++n) flat[static_cast<std::size_t>(n)] = ys[n].data[0];
        Tensor yt = tape_.constant({{N, 1}}, std::move(flat));
        Tensor emb = embedding_rows(tape_, ks, arch_.emb_dim);

        Tensor z = op_add(tape_, op_matmul(tape_, yt, in_w_), op_matmul(tape_, emb, emb_w_));
        Tensor a = op_silu(tape_, op_broadcast_add_rows(tape_, z, hidden_b_));
        return op_broadcast_add_rows(tape_, op_matmul(tape_, a, out_w_), out_b_);
    }

private:
    Tensor in_w_, emb_w_, hidden_b_, out_w_, out_b_;
};

} // namespace

std::unique_ptr<Network> build_network(const ArchDescriptor& arch, RandomSource& init_rng) {
    if (arch.in_channels < 1 || arch.base_channels < 1 || arch.hidden < 1) {
        throw ConfigError("network: channel and width counts must be positive");
    }
    if (arch.emb_dim < 2 || arch.emb_dim % 2 != 0) {
        throw ConfigError("network: emb_dim must be a positive even number");
    }
    std::unique_ptr<Network> net;
    if (arch.kind == "unet") {
        net = std::make_unique<UNet>(arch, init_rng);
    } else if (arch.kind == "mlp") {
        net = std::make_unique<MlpNet>(arch, init_rng);
    } else {
        throw ConfigError("network: unknown architecture kind '" + arch.kind + "'");
    }
    for (const NamedParam& p : net->params()) {
        quantize_f32(net->tape().leaf_value(p.t));
    }
    return net;
}

} // namespace gbmd

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gbmd/image.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/schedule.hpp"
#include "gbmd/score.hpp"
#include "gbmd/tensor.hpp"

namespace gbmd {

// Sinusoidal code for a step index: interleaved sin/cos over geometric
// periods spanning [1, 1e4]. dim must be even; k = 0 maps to [0, 1, 0, 1, ...].
std::vector<double> time_embedding(int k, int dim);

struct ArchDescriptor {
    std::string kind = "unet"; // "unet" or "mlp"
    int in_channels = 1;
    int base_channels = 16; // unet: width at full resolution, doubled per stage
    int emb_dim = 64;
    int hidden = 128; // mlp only
};

struct NamedParam {
    std::string name;
    Tensor t;
};

// A trainable noise predictor. The network owns its tape; parameters are
// leaves created at construction, forward passes append intermediates that
// the caller drops after each step. Networks predict the injected noise
// (epsilon); the score is -epsilon_hat / sqrt(eta(k)).
class Network {
public:
    virtual ~Network() = default;

    // Differentiable forward over a batch of corrupted log images (all one
    // shape). Returns the epsilon estimate, flattened row-major per item.
    virtual Tensor predict_noise_batch(std::span<const LogImage> ys,
                                       std::span<const int> ks) = 0;

    // Inference-only scoring; leaves the tape as it found it.
    Volume score(const LogImage& y, int k, const NoiseSchedule& s);

    Tape& tape() { return tape_; }
    const Tape& tape() const { return tape_; }
    const std::vector<NamedParam>& params() const { return params_; }
    const ArchDescriptor& arch() const { return arch_; }
    std::size_t param_count() const;
    std::size_t watermark() const { return watermark_; }
    void drop_intermediates() { tape_.truncate(watermark_); }

protected:
    explicit Network(ArchDescriptor arch) : arch_(std::move(arch)) {}
    Tensor add_param(const std::string& name, TensorShape shape, std::vector<double> data);
    void seal() { watermark_ = tape_.size(); }

    Tape tape_;
    std::vector<NamedParam> params_;
    ArchDescriptor arch_;
    std::size_t watermark_ = 0;
};

// Validates the descriptor, builds the network, initializes parameters from
// init_rng (fan-in-scaled uniform; output layer zeroed), and quantizes them
// to 32-bit storage.
std::unique_ptr<Network> build_network(const ArchDescriptor& arch, RandomSource& init_rng);

// Adapts a network to the read-only scoring contract the samplers consume.
class NetScoreModel final : public ScoreModel {
public:
    NetScoreModel(Network& net, NoiseSchedule s) : net_(&net), s_(std::move(s)) {}
    Volume evaluate(const LogImage& y, int k) const override { return net_->score(y, k, s_); }

private:
    Network* net_;
    NoiseSchedule s_;
};

} // namespace gbmd

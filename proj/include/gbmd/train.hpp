#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gbmd/adam.hpp"
#include "gbmd/image.hpp"
#include "gbmd/net.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/schedule.hpp"
#include "gbmd/score.hpp"

namespace gbmd {

// Denoising objective: for each item draw n, form y_k = y0 - eta/2 + sqrt(eta) n,
// and average (n + sqrt(eta(k)) * score(y_k, k))^2 over batch and elements.
// Evaluation-only form, usable with any ScoreModel (oracles, stubs).
double loss_batch(const ScoreModel& model, std::span<const LogImage> y0s,
                  std::span<const int> ks, const NoiseSchedule& s, RandomSource& rng);

// Same objective on caller-supplied noise draws (one Volume per item).
double loss_batch_with_noise(const ScoreModel& model, std::span<const LogImage> y0s,
                             std::span<const int> ks, const NoiseSchedule& s,
                             std::span<const Volume> noises);

// Differentiable form recorded on the network's tape. Identical math: the
// network predicts the noise, so the residual reduces to n - eps_hat.
Tensor loss_batch_diff(Network& net, std::span<const LogImage> y0s, std::span<const int> ks,
                       const NoiseSchedule& s, RandomSource& rng);

struct TrainConfig {
    int epochs = 1;
    int batch = 16;
    double lr = 1e-3;
    int steps = kDefaultSteps;
    double eta_per_step = kDefaultEtaPerStep;
    std::uint64_t seed = 0;
    int patch = 32; // expected image side; must be a multiple of 4
    std::string data_dir;
    int checkpoint_interval = 0;  // epochs between snapshots, 0 = final only
    std::string snapshot_path;    // stem for interval snapshots ("<stem>.e<N>")
    ArchDescriptor arch;
};

struct RngCursor {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t counter = 0;
    bool has_cache = false;
    double cache = 0.0;

    static RngCursor of(const RandomSource& r);
    RandomSource restore() const;
};

struct Checkpoint {
    TrainConfig config;
    NoiseSchedule schedule;
    ArchDescriptor arch;
    std::vector<std::string> param_names;
    std::vector<std::vector<double>> params; // values on the 32-bit grid
    AdamState opt;
    int epoch = 0;
    RngCursor data_rng, k_rng, noise_rng;
};

using StepObserver = std::function<void(int step, double loss)>;

// Algorithm: per epoch, shuffle the dataset, walk it in batches, draw k per
// item uniformly from 1..K, and take one Adam step per batch. Returns the
// final state; snapshots are written at the configured interval.
Checkpoint train(const TrainConfig& config, std::span<const ImageTensor> dataset,
                 const StepObserver& on_step = {});

std::unique_ptr<Network> network_from_checkpoint(const Checkpoint& c);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct CheckpointInfo {
    std::uint32_t version = 0;
    int steps = 0;
    double eta_per_step = 0.0;
    int epoch = 0;
    ArchDescriptor arch;
    std::uint64_t param_count = 0;
};

// Reads only the header; blobs are neither loaded nor validated.
CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

} // namespace gbmd

#include "gbmd/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbmd/errors.hpp"
#include "gbmd/forward.hpp"
#include "gbmd/ops.hpp"

namespace gbmd {
namespace {

void check_loss_batch(std::span<const LogImage> y0s, std::span<const int> ks,
                      const NoiseSchedule& s) {
    if (y0s.empty()) {
        throw std::invalid_argument("loss_batch: empty batch");
    }
    if (y0s.size() != ks.size()) {
        throw std::invalid_argument("loss_batch: " + std::to_string(y0s.size()) +
                                    " images but " + std::to_string(ks.size()) + " steps");
    }
    for (int k : ks) {
        if (k < 1 || k > s.K) {
            throw std::invalid_argument("loss_batch: step " + std::to_string(k) +
                                        " outside 1.." + std::to_string(s.K) +
                                        " (k = 0 carries no training signal)");
        }
    }
}

double residual_sum(const ScoreModel& model, const LogImage& y0, int k, const NoiseSchedule& s,
                    const Volume& noise, std::size_t& count) {
    ForwardSample fs = corrupt_log_with_noise(y0, k, s, noise);
    Volume sv = model.evaluate(fs.y_k, k);
    if (!(sv.shape == y0.shape)) {
        throw ShapeError("loss_batch: model output shape does not match the image");
    }
    const double root_eta = std::sqrt(s.eta_at(k));
    double acc = 0.0;
    for (std::size_t i = 0; i < sv.data.size(); ++i) {
        const double r = fs.noise.data[i] + root_eta * sv.data[i];
        acc += r * r;
    }
    count += sv.data.size();
    return acc;
}

} // namespace

double loss_batch(const ScoreModel& model, std::span<const LogImage> y0s,
                  std::span<const int> ks, const NoiseSchedule& s, RandomSource& rng) {
    check_loss_batch(y0s, ks, s);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < y0s.size(); ++i) {
        Volume noise = Volume::zeros(y0s[i].shape);
        for (double& v : noise.data) v = rng.gaussian();
        acc += residual_sum(model, y0s[i], ks[i], s, noise, count);
    }
    return acc / static_cast<double>(count);
}

double loss_batch_with_noise(const ScoreModel& model, std::span<const LogImage> y0s,
                             std::span<const int> ks, const NoiseSchedule& s,
                             std::span<const Volume> noises) {
    check_loss_batch(y0s, ks, s);
    if (noises.size() != y0s.size()) {
        throw std::invalid_argument("loss_batch: " + std::to_string(y0s.size()) +
                                    " images but " + std::to_string(noises.size()) +
                                    " noise draws");
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < y0s.size(); ++i) {
        acc += residual_sum(model, y0s[i], ks[i], s, noises[i], count);
    }
    return acc / static_cast<double>(count);
}

Tensor loss_batch_diff(Network& net, std::span<const LogImage> y0s, std::span<const int> ks,
                       const NoiseSchedule& s, RandomSource& rng) {
    check_loss_batch(y0s, ks, s);
    std::vector<LogImage> yks;
    yks.reserve(y0s.size());
    std::vector<double> flat_noise;
    flat_noise.reserve(y0s.size() * y0s[0].shape.numel());
    for (std::size_t i = 0; i < y0s.size(); ++i) {
        Volume noise = Volume::zeros(y0s[i].shape);
        for (double& v : noise.data) v = rng.gaussian();
        ForwardSample fs = corrupt_log_with_noise(y0s[i], ks[i], s, noise);
        yks.push_back(std::move(fs.y_k));
        flat_noise.insert(flat_noise.end(), fs.noise.data.begin(), fs.noise.data.end());
    }
    Tensor eps = net.predict_noise_batch(yks, ks);
    Tensor n = net.tape().constant(eps.shape, std::move(flat_noise));
    return op_mean(net.tape(), op_square(net.tape(), op_sub(net.tape(), n, eps)));
}

RngCursor RngCursor::of(const RandomSource& r) {
    return RngCursor{r.seed(), r.stream(), r.counter(), r.has_cached_gaussian(),
                     r.cached_gaussian()};
}

RandomSource RngCursor::restore() const {
    return RandomSource::restore(seed, stream, counter, has_cache, cache);
}

namespace {

void validate_config(const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (cfg.batch < 1) throw ConfigError("train: batch size must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (cfg.steps < 1) throw ConfigError("train: steps must be positive");
    if (!(cfg.eta_per_step > 0.0)) throw ConfigError("train: eta_per_step must be positive");
    if (cfg.patch < 4 || cfg.patch % 4 != 0) {
        throw ConfigError("train: patch size must be a positive multiple of 4");
    }
    if (cfg.checkpoint_interval < 0) {
        throw ConfigError("train: checkpoint interval must be >= 0");
    }
}

Checkpoint snapshot(const TrainConfig& cfg, const NoiseSchedule& sched, const Network& net,
                    const AdamState& opt, int epoch, const RandomSource& data_rng,
                    const RandomSource& k_rng, const RandomSource& noise_rng) {
    Checkpoint c;
    c.config = cfg;
    c.schedule = sched;
    c.arch = net.arch();
    for (const NamedParam& p : net.params()) {
        c.param_names.push_back(p.name);
        c.params.push_back(net.tape().value(p.t));
    }
    c.opt = opt;
    c.epoch = epoch;
    c.data_rng = RngCursor::of(data_rng);
    c.k_rng = RngCursor::of(k_rng);
    c.noise_rng = RngCursor::of(noise_rng);
    return c;
}

} // namespace

Checkpoint train(const TrainConfig& cfg, std::span<const ImageTensor> dataset,
                 const StepObserver& on_step) {
    validate_config(cfg);
    if (dataset.empty()) {
        throw ConfigError("train: dataset is empty");
    }
    NoiseSchedule sched = build_linear_schedule(cfg.steps, cfg.eta_per_step);
    std::vector<LogImage> ys;
    ys.reserve(dataset.size());
    for (const ImageTensor& x : dataset) {
        if (!(x.shape == dataset[0].shape)) {
            throw ShapeError("train: dataset images must share one shape");
        }
        ys.push_back(log_image(x));
    }

    RandomSource init_rng(cfg.seed, 1);
    std::unique_ptr<Network> net = build_network(cfg.arch, init_rng);
    RandomSource data_rng(cfg.seed, 2);
    RandomSource k_rng(cfg.seed, 3);
    RandomSource noise_rng(cfg.seed, 4);
    AdamState opt = AdamState::init(net->params());
    const AdamConfig adam_cfg{.lr = cfg.lr};

    const int n_data = static_cast<int>(dataset.size());
    const int batch = std::min(cfg.batch, n_data);
    const int steps_per_epoch = n_data / batch;
    std::vector<int> order(static_cast<std::size_t>(n_data));
    for (int i = 0; i < n_data; ++i) order[static_cast<std::size_t>(i)] = i;

    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int i = n_data - 1; i > 0; --i) {
            const int j = static_cast<int>(data_rng.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        for (int b = 0; b < steps_per_epoch; ++b) {
            std::vector<LogImage> y0s;
            y0s.reserve(static_cast<std::size_t>(batch));
            std::vector<int> ks(static_cast<std::size_t>(batch));
            for (int i = 0; i < batch; ++i) {
                y0s.push_back(ys[static_cast<std::size_t>(order[static_cast<std::size_t>(b * batch + i)])]);
                ks[static_cast<std::size_t>(i)] =
                    1 + static_cast<int>(k_rng.below(static_cast<std::uint64_t>(sched.K)));
            }
            net->drop_intermediates();
            net->tape().zero_grad();
            Tensor loss = loss_batch_diff(*net, y0s, ks, sched, noise_rng);
            const double lval = net->tape().value(loss)[0];
            if (!std::isfinite(lval)) {
                std::string klist;
                for (int k : ks) klist += (klist.empty() ? "" : ", ") + std::to_string(k);
                throw TrainingDivergedError("train: non-finite loss at step " +
                                            std::to_string(global_step + 1) + " (epoch " +
                                            std::to_string(epoch) + ", k = [" + klist + "])");
            }
            net->tape().backward(loss);
            adam_step(net->tape(), net->params(), opt, adam_cfg);
            ++global_step;
            if (on_step) on_step(global_step, lval);
        }
        if (cfg.checkpoint_interval > 0 && !cfg.snapshot_path.empty() &&
            epoch % cfg.checkpoint_interval == 0 && epoch < cfg.epochs) {
            save_checkpoint(
                snapshot(cfg, sched, *net, opt, epoch, data_rng, k_rng, noise_rng),
                cfg.snapshot_path + ".e" + std::to_string(epoch));
        }
    }
    net->drop_intermediates();
    return snapshot(cfg, sched, *net, opt, cfg.epochs, data_rng, k_rng, noise_rng);
}

std::unique_ptr<Network> network_from_checkpoint(const Checkpoint& c) {
    RandomSource scratch(0, 0);
    std::unique_ptr<Network> net = build_network(c.arch, scratch);
    const auto& params = net->params();
    if (params.size() != c.params.size()) {
        throw ContractError("checkpoint: parameter list does not match the architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != c.param_names[i] ||
            params[i].t.shape.numel() != c.params[i].size()) {
            throw ContractError("checkpoint: parameter '" + c.param_names[i] +
                                "' does not match the architecture");
        }
        net->tape().leaf_value(params[i].t) = c.params[i];
    }
    return net;
}

} // namespace gbmd

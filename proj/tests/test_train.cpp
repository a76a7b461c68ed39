#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "gbmd/errors.hpp"
#include "gbmd/forward.hpp"
#include "gbmd/net.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/train.hpp"

using namespace gbmd;
namespace fs = std::filesystem;

namespace {

struct ZeroModel final : ScoreModel {
    Volume evaluate(const LogImage& y, int) const override { return Volume::zeros(y.shape); }
};

// Wired to externally drawn noise: returns -n / sqrt(eta(k)) for the draw
// matched to the image being scored.
struct NoiseEchoModel final : ScoreModel {
    const std::vector<Volume>* noises;
    const NoiseSchedule* s;
    mutable std::size_t next = 0;

    Volume evaluate(const LogImage& y, int k) const override {
        const Volume& n = (*noises)[next++];
        REQUIRE(n.shape == y.shape);
        const double root = std::sqrt(s->eta_at(k));
        Volume out = n;
        for (double& v : out.data) v = -v / root;
        return out;
    }
};

std::vector<ImageTensor> bump_dataset(int count, int side, RandomSource& rng) {
    std::vector<ImageTensor> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double cx = 0.25 * side + 0.5 * side * rng.uniform();
        const double cy = 0.25 * side + 0.5 * side * rng.uniform();
        const double amp = 0.3 + 0.4 * rng.uniform();
        const double w = 0.1 * side + 0.15 * side * rng.uniform();
        std::vector<double> data(static_cast<std::size_t>(side) * side);
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
                data[static_cast<std::size_t>(r) * side + c] =
                    0.15 + amp * std::exp(-d2 / (2.0 * w * w));
            }
        }
        out.push_back(make_image({1, side, side}, std::move(data)));
    }
    return out;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

fs::path temp_dir() {
    fs::path d = fs::temp_directory_path() / "gbmd_train_tests";
    fs::create_directories(d);
    return d;
}

} // namespace

TEST_CASE("loss_batch: zero model measures plain noise energy") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    ZeroModel zero;
    RandomSource rng(11, 0);

    std::vector<LogImage> y0s;
    std::vector<int> ks;
    for (int i = 0; i < 10; ++i) {
        y0s.push_back(make_log_image({1, 100, 100}, std::vector<double>(10000, -0.4)));
        ks.push_back(50 + 45 * i);
    }
    const double loss = loss_batch(zero, y0s, ks, s, rng);
    // E[n^2] = 1, Var[n^2] = 2, so 5 SE over 1e5 elements is ~0.0224.
    const double se = std::sqrt(2.0 / 1e5);
    CHECK(std::abs(loss - 1.0) < 5 * se);
    CHECK(loss >= 0.0);
}

TEST_CASE("loss_batch: echoing the drawn noise cancels") {
    SUBCASE("bitwise zero on a dyadic schedule") {
        // eta = 0.0625 and 0.25 have exactly representable square roots, so
        // the echo model's ratio multiplies back with no rounding at all.
        NoiseSchedule s = build_linear_schedule(4, 0.0625);
        std::vector<LogImage> y0s = {make_log_image({1, 3, 3}, std::vector<double>(9, -1.0)),
                                     make_log_image({1, 3, 3}, std::vector<double>(9, 0.5))};
        std::vector<int> ks = {1, 4};
        RandomSource rng(3, 1);
        std::vector<Volume> noises;
        for (const LogImage& y : y0s) {
            Volume n = Volume::zeros(y.shape);
            for (double& v : n.data) v = rng.gaussian();
            noises.push_back(std::move(n));
        }
        NoiseEchoModel echo;
        echo.noises = &noises;
        echo.s = &s;
        CHECK(loss_batch_with_noise(echo, y0s, ks, s, noises) == 0.0);
    }

    SUBCASE("residual at rounding scale on the default schedule") {
        NoiseSchedule s = build_linear_schedule(500, 0.0004);
        std::vector<LogImage> y0s = {make_log_image({1, 4, 4}, std::vector<double>(16, -0.2))};
        std::vector<int> ks = {200};
        RandomSource rng(4, 1);
        std::vector<Volume> noises;
        Volume n = Volume::zeros(y0s[0].shape);
        for (double& v : n.data) v = rng.gaussian();
        noises.push_back(std::move(n));
        NoiseEchoModel echo;
        echo.noises = &noises;
        echo.s = &s;
        CHECK(loss_batch_with_noise(echo, y0s, ks, s, noises) < 1e-30);
    }
}

TEST_CASE("loss_batch: the analytic delta score is a per-sample minimizer") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    LogImage y0 = make_log_image({1, 50, 50}, std::vector<double>(2500, -0.7));
    DeltaScoreOracle oracle(y0, s);
    RandomSource rng(21, 0);

    std::vector<LogImage> y0s(40, y0); // 1e5 elements total
    std::vector<int> ks(40, 200);
    const double loss = loss_batch(oracle, y0s, ks, s, rng);
    CHECK(loss < 1e-3);
}

TEST_CASE("loss_batch: k = 0 is rejected") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    ZeroModel zero;
    RandomSource rng(5, 0);
    std::vector<LogImage> y0s = {scalar_log_image(0.0)};
    std::vector<int> ks = {0};
    CHECK_THROWS_AS(loss_batch(zero, y0s, ks, s, rng), std::invalid_argument);
}

TEST_CASE("loss paths agree: evaluation vs differentiable") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    ArchDescriptor arch;
    arch.base_channels = 2;
    arch.emb_dim = 4;
    RandomSource init(9, 0);
    auto net = build_network(arch, init);
    // nudge parameters so the net is not identically zero
    {
        RandomSource jitter(10, 0);
        for (const NamedParam& p : net->params()) {
            auto& v = net->tape().leaf_value(p.t);
            for (double& x : v) x += 0.05 * (2.0 * jitter.uniform() - 1.0);
            quantize_f32(v);
        }
    }

    RandomSource data_rng(12, 0);
    std::vector<LogImage> y0s;
    std::vector<int> ks = {100, 321};
    for (int i = 0; i < 2; ++i) {
        std::vector<double> d(16);
        for (double& v : d) v = -1.0 + 2.0 * data_rng.uniform();
        y0s.push_back(make_log_image({1, 4, 4}, std::move(d)));
    }

    RandomSource rng_eval(77, 3), rng_diff(77, 3);
    NetScoreModel model(*net, s);
    const double eval_loss = loss_batch(model, y0s, ks, s, rng_eval);
    Tensor diff = loss_batch_diff(*net, y0s, ks, s, rng_diff);
    const double diff_loss = net->tape().value(diff)[0];
    net->drop_intermediates();
    CHECK(eval_loss == doctest::Approx(diff_loss).epsilon(1e-12));
    CHECK(diff_loss >= 0.0);
}

TEST_CASE("train: zero epochs returns the untouched initial state") {
    RandomSource data_rng(1, 0);
    std::vector<ImageTensor> data = bump_dataset(4, 8, data_rng);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.batch = 2;
    cfg.seed = 42;
    cfg.patch = 8;
    cfg.arch.base_channels = 2;
    cfg.arch.emb_dim = 4;
    Checkpoint c = train(cfg, data);
    CHECK(c.epoch == 0);
    CHECK(c.opt.t == 0);

    RandomSource init(42, 1);
    auto fresh = build_network(cfg.arch, init);
    REQUIRE(fresh->params().size() == c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) {
        CHECK(fresh->tape().value(fresh->params()[i].t) == c.params[i]);
    }
}

TEST_CASE("train: empty dataset is a config error") {
    TrainConfig cfg;
    std::vector<ImageTensor> none;
    CHECK_THROWS_AS(train(cfg, none), ConfigError);
}

TEST_CASE("train: gradient flows and the loss trends down on a toy problem") {
    // scalar images drawn from a lognormal prior, tiny MLP
    RandomSource prior(6, 0);
    std::vector<ImageTensor> data;
    for (int i = 0; i < 64; ++i) {
        data.push_back(scalar_image(std::exp(prior.gaussian())));
    }
    TrainConfig cfg;
    cfg.epochs = 64; // 64 items / batch 16 = 4 steps per epoch
    cfg.batch = 16;
    cfg.lr = 3e-3;
    cfg.seed = 7;
    cfg.patch = 4;
    cfg.arch.kind = "mlp";
    cfg.arch.hidden = 32;
    cfg.arch.emb_dim = 8;

    std::vector<double> losses;
    Checkpoint c = train(cfg, data, [&](int, double l) { losses.push_back(l); });
    REQUIRE(losses.size() == 256);
    const std::size_t tenth = losses.size() / 10;
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < tenth; ++i) {
        head += losses[i];
        tail += losses[losses.size() - 1 - i];
    }
    CHECK(tail / static_cast<double>(tenth) < head / static_cast<double>(tenth));
    CHECK(c.epoch == 64);
    CHECK(c.opt.t == 256);
}

TEST_CASE("train: one batch step produces a nonzero gradient") {
    NoiseSchedule s = build_linear_schedule(500, 0.0004);
    ArchDescriptor arch;
    arch.base_channels = 2;
    arch.emb_dim = 4;
    RandomSource init(14, 0);
    auto net = build_network(arch, init);
    std::vector<LogImage> y0s = {make_log_image({1, 4, 4}, std::vector<double>(16, -0.5))};
    std::vector<int> ks = {250};
    RandomSource rng(15, 0);
    Tensor loss = loss_batch_diff(*net, y0s, ks, s, rng);
    net->tape().backward(loss);
    double norm2 = 0.0;
    for (const NamedParam& p : net->params()) {
        for (double g : net->tape().grad(p.t)) norm2 += g * g;
    }
    CHECK(std::sqrt(norm2) > 1e-12);
}

TEST_CASE("train: identical seeds give byte-identical checkpoints") {
    RandomSource data_rng(2, 0);
    std::vector<ImageTensor> data = bump_dataset(8, 8, data_rng);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch = 4;
    cfg.seed = 123;
    cfg.patch = 8;
    cfg.arch.base_channels = 2;
    cfg.arch.emb_dim = 4;

    const fs::path d = temp_dir();
    save_checkpoint(train(cfg, data), d / "run_a.ckpt");
    save_checkpoint(train(cfg, data), d / "run_b.ckpt");
    CHECK(file_bytes(d / "run_a.ckpt") == file_bytes(d / "run_b.ckpt"));
}

TEST_CASE("checkpoint: round trips and probe outputs") {
    RandomSource data_rng(3, 0);
    std::vector<ImageTensor> data = bump_dataset(6, 8, data_rng);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch = 3;
    cfg.seed = 9;
    cfg.patch = 8;
    cfg.arch.base_channels = 2;
    cfg.arch.emb_dim = 4;
    Checkpoint c = train(cfg, data);

    const fs::path d = temp_dir();
    const fs::path p1 = d / "round1.ckpt";
    const fs::path p2 = d / "round2.ckpt";
    save_checkpoint(c, p1);
    Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);

    SUBCASE("save -> load -> save is byte-identical") {
        CHECK(file_bytes(p1) == file_bytes(p2));
    }

    SUBCASE("loaded model reproduces outputs bit-for-bit") {
        auto a = network_from_checkpoint(c);
        auto b = network_from_checkpoint(loaded);
        NoiseSchedule s = loaded.schedule;
        LogImage probe = make_log_image({1, 8, 8}, std::vector<double>(64, -0.3));
        for (int k : {1, 250, 500}) {
            Volume ga = a->score(probe, k, s);
            Volume gb = b->score(probe, k, s);
            CHECK(ga.data == gb.data);
        }
    }

    SUBCASE("schedule and optimizer state survive the trip") {
        CHECK(loaded.schedule.eta == c.schedule.eta);
        CHECK(loaded.opt.t == c.opt.t);
        CHECK(loaded.opt.m == c.opt.m);
        CHECK(loaded.opt.v == c.opt.v);
        CHECK(loaded.epoch == c.epoch);
        CHECK(loaded.noise_rng.counter == c.noise_rng.counter);
    }

    SUBCASE("header-only inspection skips the blobs") {
        CheckpointInfo info = inspect_checkpoint(p1);
        CHECK(info.steps == 500);
        CHECK(info.eta_per_step == doctest::Approx(0.0004).epsilon(1e-15));
        CHECK(info.epoch == 1);
        CHECK(info.arch.kind == "unet");
        std::uint64_t count = 0;
        for (const auto& blob : c.params) count += blob.size();
        CHECK(info.param_count == count);

        // header survives blob truncation
        std::string bytes = file_bytes(p1);
        const fs::path cut = d / "cut.ckpt";
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
        out.close();
        CHECK(inspect_checkpoint(cut).epoch == 1);
        CHECK_THROWS_AS(load_checkpoint(cut), CorruptCheckpointError);
    }
}

TEST_CASE("checkpoint: malformed files fail loudly") {
    const fs::path d = temp_dir();

    SUBCASE("empty file") {
        const fs::path p = d / "empty.ckpt";
        std::ofstream(p, std::ios::binary).close();
        CHECK_THROWS_AS(load_checkpoint(p), CorruptCheckpointError);
    }

    SUBCASE("wrong magic") {
        const fs::path p = d / "magic.ckpt";
        std::ofstream out(p, std::ios::binary);
        out << "NOPE";
        out.close();
        CHECK_THROWS_AS(load_checkpoint(p), CorruptCheckpointError);
    }

    SUBCASE("unsupported version") {
        const fs::path p = d / "version.ckpt";
        std::ofstream out(p, std::ios::binary);
        out << "GBMD";
        const std::uint32_t v = 99;
        out.write(reinterpret_cast<const char*>(&v), 4);
        const std::uint64_t hlen = 0;
        out.write(reinterpret_cast<const char*>(&hlen), 8);
        out.close();
        CHECK_THROWS_AS(load_checkpoint(p), UnsupportedVersionError);
    }

    SUBCASE("truncation reports an offset") {
        const fs::path p = d / "trunc_src.ckpt";
        RandomSource data_rng(4, 0);
        std::vector<ImageTensor> data = bump_dataset(2, 8, data_rng);
        TrainConfig cfg;
        cfg.epochs = 0;
        cfg.batch = 2;
        cfg.patch = 8;
        cfg.arch.base_channels = 2;
        cfg.arch.emb_dim = 4;
        save_checkpoint(train(cfg, data), p);
        std::string bytes = file_bytes(p);
        const fs::path cut = d / "trunc.ckpt";
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), 40); // mid-header
        out.close();
        try {
            load_checkpoint(cut);
            FAIL("expected CorruptCheckpointError");
        } catch (const CorruptCheckpointError& e) {
            CHECK(e.offset() <= 40);
            CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        }
    }
}

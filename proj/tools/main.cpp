#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gbmd/errors.hpp"
#include "gbmd/forward.hpp"
#include "gbmd/imgio.hpp"
#include "gbmd/metrics.hpp"
#include "gbmd/net.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/samplers.hpp"
#include "gbmd/schedule.hpp"
#include "gbmd/train.hpp"
#include "manifest.hpp"
#include "verify.hpp"

namespace fs = std::filesystem;
using namespace gbmd;
using gbmd::cli::Manifest;

namespace {

// Fixed stream ids hanging off the single --seed: 0 is the dataset stream,
// 1-4 belong to train() internals, 5 corrupts, 6 denoises, 20+ verify.
constexpr std::uint64_t kCorruptStream = 5;
constexpr std::uint64_t kDenoiseStream = 6;

struct CorruptArgs {
    std::string in, out;
    int step = -1;
    double level = -1.0;
    int steps = kDefaultSteps;
    double eta_per_step = kDefaultEtaPerStep;
    std::uint64_t seed = 0;
    bool has_step = false, has_level = false;
};

int cmd_corrupt(const CorruptArgs& a) {
    if (a.has_step == a.has_level)
        throw ConfigError("corrupt needs exactly one of --step or --level");
    const NoiseSchedule s = build_linear_schedule(a.steps, a.eta_per_step);
    const int k = a.has_step ? a.step : step_for_noise_level(s, a.level);

    const ImageTensor x = to_intensity(read_pnm(a.in));
    RandomSource rng(a.seed, kCorruptStream);
    ImageTensor out = x;
    if (k != 0) out = corrupt_intensity(x, k, s, rng).first;
    write_pnm(from_intensity(out), a.out);

    Manifest m;
    m.subcommand = "corrupt";
    m.note("written_utc", gbmd::cli::utc_timestamp());
    m.note("schedule_steps", static_cast<std::int64_t>(a.steps));
    m.note("schedule_eta_per_step", a.eta_per_step);
    m.note("resolved_step", static_cast<std::int64_t>(k));
    m.opt("in", a.in);
    m.opt("out", a.out);
    if (a.has_step) m.opt("step", static_cast<std::int64_t>(a.step));
    if (a.has_level) m.opt("level", a.level);
    m.opt("steps", static_cast<std::int64_t>(a.steps));
    m.opt("eta-per-step", a.eta_per_step);
    m.opt("seed", a.seed);
    write_manifest(m, a.out + ".manifest");
    return 0;
}

struct TrainArgs {
    std::string data, out = "model.ckpt";
    int epochs = 1, batch = 16, patch = 32, count = 256;
    double lr = 1e-3;
    int steps = kDefaultSteps;
    double eta_per_step = kDefaultEtaPerStep;
    std::uint64_t seed = 0;
    std::string arch = "unet";
    int base_channels = 16, emb_dim = 64, hidden = 128;
    int snapshot_interval = 0;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
    DatasetStream stream(a.data, a.patch, a.seed);
    for (const std::string& w : stream.warnings()) std::cerr << "warning: " << w << "\n";
    const std::vector<ImageTensor> dataset = draw_patches(stream, a.count);

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch = a.batch;
    cfg.lr = a.lr;
    cfg.steps = a.steps;
    cfg.eta_per_step = a.eta_per_step;
    cfg.seed = a.seed;
    cfg.patch = a.patch;
    cfg.data_dir = a.data;
    cfg.checkpoint_interval = a.snapshot_interval;
    cfg.snapshot_path = a.out;
    cfg.arch.kind = a.arch;
    cfg.arch.base_channels = a.base_channels;
    cfg.arch.emb_dim = a.emb_dim;
    cfg.arch.hidden = a.hidden;
    cfg.arch.in_channels = dataset.empty() ? 1 : dataset.front().shape.channels;

    int total_steps = 0;
    const Checkpoint ckpt = train(cfg, dataset, [&](int step, double loss) {
        total_steps = step;
        if (!a.quiet && step % 25 == 0) std::printf("step %d loss %.6f\n", step, loss);
    });
    save_checkpoint(ckpt, a.out);
    if (!a.quiet) std::printf("trained %d steps, wrote %s\n", total_steps, a.out.c_str());

    Manifest m;
    m.subcommand = "train";
    m.note("written_utc", gbmd::cli::utc_timestamp());
    m.note("schedule_steps", static_cast<std::int64_t>(a.steps));
    m.note("schedule_eta_per_step", a.eta_per_step);
    m.note("checkpoint_id", gbmd::cli::file_digest(a.out));
    m.note("param_count", static_cast<std::int64_t>(inspect_checkpoint(a.out).param_count));
    m.opt("data", a.data);
    m.opt("out", a.out);
    m.opt("epochs", static_cast<std::int64_t>(a.epochs));
    m.opt("batch", static_cast<std::int64_t>(a.batch));
    m.opt("lr", a.lr);
    m.opt("patch", static_cast<std::int64_t>(a.patch));
    m.opt("count", static_cast<std::int64_t>(a.count));
    m.opt("steps", static_cast<std::int64_t>(a.steps));
    m.opt("eta-per-step", a.eta_per_step);
    m.opt("seed", a.seed);
    m.opt("arch", a.arch);
    m.opt("base-channels", static_cast<std::int64_t>(a.base_channels));
    m.opt("emb-dim", static_cast<std::int64_t>(a.emb_dim));
    m.opt("hidden", static_cast<std::int64_t>(a.hidden));
    m.opt("snapshot-interval", static_cast<std::int64_t>(a.snapshot_interval));
    write_manifest(m, a.out + ".manifest");
    return 0;
}

struct DenoiseArgs {
    std::string in, out, ckpt;
    int step = -1;
    double level = -1.0;
    std::string method = "ode";
    double zeta = 0.0;
    std::uint64_t seed = 0;
    bool has_step = false, has_level = false;
};

int cmd_denoise(const DenoiseArgs& a) {
    if (a.has_step == a.has_level)
        throw ConfigError("denoise needs exactly one of --step or --level");
    if (a.zeta < 0.0 || a.zeta > 1.0)
        throw ConfigError("--zeta must lie in [0, 1] (fraction of the admissible scale)");

    const ImageTensor x = to_intensity(read_pnm(a.in));
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const NoiseSchedule& s = ckpt.schedule;
    const int k_start = a.has_step ? a.step : step_for_noise_level(s, a.level);

    std::unique_ptr<Network> net = network_from_checkpoint(ckpt);
    NetScoreModel model(*net, s);

    SamplerConfig cfg;
    cfg.method = sampler_method_from_name(a.method);
    cfg.k_start = k_start;
    if (a.zeta > 0.0) {
        // --zeta is a fraction: zeta_k = z * sqrt(eta(k-1)), valid for every k.
        cfg.zeta.assign(static_cast<std::size_t>(s.K) + 1, 0.0);
        for (int k = 1; k <= s.K; ++k)
            cfg.zeta[static_cast<std::size_t>(k)] = a.zeta * std::sqrt(s.eta_at(k - 1));
    }

    RandomSource rng(a.seed, kDenoiseStream);
    const ImageTensor out = denoise(x, model, s, cfg, rng);
    write_pnm(from_intensity(out), a.out);

    Manifest m;
    m.subcommand = "denoise";
    m.note("written_utc", gbmd::cli::utc_timestamp());
    m.note("schedule_steps", static_cast<std::int64_t>(s.K));
    m.note("schedule_eta_per_step", s.K > 0 ? s.eta_at(1) : 0.0);
    m.note("checkpoint_id", gbmd::cli::file_digest(a.ckpt));
    m.note("resolved_k_start", static_cast<std::int64_t>(k_start));
    m.opt("in", a.in);
    m.opt("out", a.out);
    m.opt("ckpt", a.ckpt);
    if (a.has_step) m.opt("step", static_cast<std::int64_t>(a.step));
    if (a.has_level) m.opt("level", a.level);
    m.opt("method", a.method);
    m.opt("zeta", a.zeta);
    m.opt("seed", a.seed);
    write_manifest(m, a.out + ".manifest");
    return 0;
}

struct EvalArgs {
    std::string clean, test, out;
};

int cmd_eval(const EvalArgs& a) {
    std::vector<std::string> clean_names, test_names;
    const std::vector<ImageTensor> clean = load_directory(a.clean, &clean_names);
    const std::vector<ImageTensor> test = load_directory(a.test, &test_names);

    if (clean_names != test_names) {
        std::string unmatched;
        const std::set<std::string> cs(clean_names.begin(), clean_names.end());
        const std::set<std::string> ts(test_names.begin(), test_names.end());
        for (const auto& n : cs)
            if (!ts.count(n)) unmatched += " clean-only:" + n;
        for (const auto& n : ts)
            if (!cs.count(n)) unmatched += " test-only:" + n;
        throw ContractError("eval: directories do not pair up;" +
                            (unmatched.empty() ? std::string(" same names, different order")
                                               : unmatched));
    }

    const MetricReport report = evaluate_set(clean, test, clean_names);
    const std::string csv = report_csv(report);
    std::fputs(csv.c_str(), stdout);
    if (!a.out.empty()) {
        std::ofstream f(a.out, std::ios::trunc);
        if (!f) throw ConfigError("cannot write report " + a.out);
        f << csv;
        f.close();

        Manifest m;
        m.subcommand = "eval";
        m.note("written_utc", gbmd::cli::utc_timestamp());
        m.note("images", static_cast<std::int64_t>(report.rows.size()));
        m.opt("clean", a.clean);
        m.opt("test", a.test);
        m.opt("out", a.out);
        write_manifest(m, a.out + ".manifest");
    }
    return 0;
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multiplicative-noise diffusion: corrupt, train, denoise, evaluate, verify"};
    app.require_subcommand(1);
    app.fallthrough(); // lets `gbmd denoise --config run.manifest` reach the top-level option
    app.set_config("--config", "", "replay a run manifest or key=value config")
        ->envname("GBMD_CONFIG");

    CorruptArgs ca;
    CLI::App* corrupt = app.add_subcommand("corrupt", "apply forward speckle corruption");
    corrupt->add_option("--in", ca.in, "input PGM/PPM")->required();
    corrupt->add_option("--out", ca.out, "output image path")->required();
    CLI::Option* c_step = corrupt->add_option("--step", ca.step, "corruption step k");
    CLI::Option* c_level = corrupt->add_option("--level", ca.level, "noise level (eta)");
    c_step->excludes(c_level);
    corrupt->add_option("--steps", ca.steps, "schedule length K");
    corrupt->add_option("--eta-per-step", ca.eta_per_step, "schedule increment");
    corrupt->add_option("--seed", ca.seed, "random seed")->envname("GBMD_CORRUPT_SEED");
    corrupt->callback([&] {
        ca.has_step = c_step->count() > 0;
        ca.has_level = c_level->count() > 0;
        cmd_corrupt(ca);
    });

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "fit the noise predictor");
    train_cmd->add_option("--data", ta.data, "directory of PNM training images")
        ->required()
        ->envname("GBMD_TRAIN_DATA");
    train_cmd->add_option("--out", ta.out, "checkpoint path");
    train_cmd->add_option("--epochs", ta.epochs, "training epochs");
    train_cmd->add_option("--batch", ta.batch, "batch size");
    train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
    train_cmd->add_option("--patch", ta.patch, "square patch side");
    train_cmd->add_option("--count", ta.count, "patches drawn for the dataset");
    train_cmd->add_option("--steps", ta.steps, "schedule length K");
    train_cmd->add_option("--eta-per-step", ta.eta_per_step, "schedule increment");
    train_cmd->add_option("--seed", ta.seed, "random seed")->envname("GBMD_TRAIN_SEED");
    train_cmd->add_option("--arch", ta.arch, "network kind (unet or mlp)");
    train_cmd->add_option("--base-channels", ta.base_channels, "unet width");
    train_cmd->add_option("--emb-dim", ta.emb_dim, "time embedding size");
    train_cmd->add_option("--hidden", ta.hidden, "mlp hidden width");
    train_cmd->add_option("--snapshot-interval", ta.snapshot_interval,
                          "epochs between snapshots (0 = final only)");
    train_cmd->add_flag("--quiet", ta.quiet, "suppress progress lines");
    train_cmd->callback([&] { cmd_train(ta); });

    DenoiseArgs da;
    CLI::App* denoise_cmd = app.add_subcommand("denoise", "reverse the corruption");
    denoise_cmd->add_option("--in", da.in, "noisy input image")->required();
    denoise_cmd->add_option("--out", da.out, "denoised output path")->required();
    denoise_cmd->add_option("--ckpt", da.ckpt, "trained checkpoint")->required();
    CLI::Option* d_step = denoise_cmd->add_option("--step", da.step, "start step k");
    CLI::Option* d_level = denoise_cmd->add_option("--level", da.level, "noise level (eta)");
    d_step->excludes(d_level);
    denoise_cmd->add_option("--method", da.method, "ode, ddim, or stochastic");
    denoise_cmd->add_option("--zeta", da.zeta,
                            "ddim noise fraction in [0, 1]; 0 is deterministic");
    denoise_cmd->add_option("--seed", da.seed, "random seed")->envname("GBMD_DENOISE_SEED");
    denoise_cmd->callback([&] {
        da.has_step = d_step->count() > 0;
        da.has_level = d_level->count() > 0;
        cmd_denoise(da);
    });

    EvalArgs ea;
    CLI::App* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM report over paired directories");
    eval_cmd->add_option("--clean", ea.clean, "directory of reference images")->required();
    eval_cmd->add_option("--test", ea.test, "directory of images to score")->required();
    eval_cmd->add_option("--out", ea.out, "also write the CSV here");
    eval_cmd->callback([&] { cmd_eval(ea); });

    std::uint64_t verify_seed = 0;
    std::string fault;
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the analytic-oracle property suite");
    verify_cmd->add_option("--seed", verify_seed, "random seed")->envname("GBMD_VERIFY_SEED");
    verify_cmd->add_option("--fault", fault,
                           "inject a deliberate defect (drift-sign) as a negative control");
    int verify_rc = 0;
    verify_cmd->callback([&] { verify_rc = gbmd::cli::run_verify(verify_seed, fault); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage-error: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << error_category(e) << ": " << one_line(e.what()) << "\n";
        return 1;
    }
    return verify_rc;
}

#include "verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "gbmd/errors.hpp"
#include "gbmd/forward.hpp"
#include "gbmd/ops.hpp"
#include "gbmd/rng.hpp"
#include "gbmd/samplers.hpp"
#include "gbmd/schedule.hpp"
#include "gbmd/score.hpp"
#include "gbmd/tensor.hpp"

namespace gbmd::cli {

namespace {

struct PropertyResult {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& xs) {
    Moments m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(xs.size() - 1);
    return m;
}

// Forward-kernel moment check at one step: sample mean and variance of
// y_k - y0 against (-eta/2, eta). The fault mode flips the drift sign.
PropertyResult check_forward_moments(std::uint64_t seed, bool fault_drift) {
    const NoiseSchedule s = build_linear_schedule(kDefaultSteps, kDefaultEtaPerStep);
    const int k = 200;
    const double eta = s.eta_at(k);
    const int n = 100000;
    RandomSource rng(seed, 20);
    const LogImage y0 = scalar_log_image(-0.4);
    std::vector<double> shifts;
    shifts.reserve(n);
    for (int t = 0; t < n; ++t) {
        ForwardSample fs = corrupt_log(y0, k, s, rng);
        double shift = fs.y_k.data[0] - y0.data[0];
        if (fault_drift) shift += eta; // negative control: +eta/2 drift instead
        shifts.push_back(shift);
    }
    const Moments m = moments(shifts);
    const double se_mean = std::sqrt(eta / n);
    const double se_var = eta * std::sqrt(2.0 / (n - 1));
    const double mean_err = std::abs(m.mean - (-0.5 * eta));
    const double var_err = std::abs(m.var - eta);
    PropertyResult r;
    r.pass = mean_err < 5 * se_mean && var_err < 5 * se_var;
    r.detail = fmt("mean error %.2e (allow %.2e)", mean_err, 5 * se_mean) + ", " +
               fmt("variance error %.2e (allow %.2e)", var_err, 5 * se_var);
    return r;
}

// The corrupted intensity must stay a martingale: E[x_k] == x0.
PropertyResult check_martingale(std::uint64_t seed, bool fault_drift) {
    const NoiseSchedule s = build_linear_schedule(kDefaultSteps, kDefaultEtaPerStep);
    const int k = 300;
    const double eta = s.eta_at(k);
    const double x0v = 0.5;
    const int n = 100000;
    RandomSource rng(seed, 21);
    const ImageTensor x0 = scalar_image(x0v);
    std::vector<double> xs;
    xs.reserve(n);
    for (int t = 0; t < n; ++t) {
        auto [xk, fs] = corrupt_intensity(x0, k, s, rng);
        double v = xk.data[0];
        if (fault_drift) v *= std::exp(eta); // consistent with the flipped drift
        xs.push_back(v);
    }
    const Moments m = moments(xs);
    const double se = std::sqrt(m.var / n);
    const double err = std::abs(m.mean - x0v);
    PropertyResult r;
    r.pass = err < 5 * se;
    r.detail = fmt("|E[x_k] - x0| = %.2e (allow %.2e)", err, 5 * se);
    return r;
}

// Per-step path simulation must agree with the closed-form kernel in law.
PropertyResult check_path_closed_form(std::uint64_t seed) {
    const NoiseSchedule s = build_linear_schedule(kDefaultSteps, kDefaultEtaPerStep);
    const int k = 150;
    const double eta = s.eta_at(k);
    const int n = 20000;
    const LogImage y0 = scalar_log_image(-1.0);
    RandomSource rng(seed, 22);
    std::vector<double> path_vals;
    path_vals.reserve(n);
    for (int t = 0; t < n; ++t)
        path_vals.push_back(simulate_forward_path(y0, k, s, rng).data[0]);
    const Moments m = moments(path_vals);
    const double se_mean = std::sqrt(eta / n);
    const double se_var = eta * std::sqrt(2.0 / (n - 1));
    const double mean_err = std::abs(m.mean - (y0.data[0] - 0.5 * eta));
    const double var_err = std::abs(m.var - eta);
    PropertyResult r;
    r.pass = mean_err < 5 * se_mean && var_err < 5 * se_var;
    r.detail = fmt("mean error %.2e (allow %.2e)", mean_err, 5 * se_mean) + ", " +
               fmt("variance error %.2e (allow %.2e)", var_err, 5 * se_var);
    return r;
}

// DDIM with the exact delta score and zeta = 0 must land on y0.
PropertyResult check_ddim_recovery(std::uint64_t seed) {
    const NoiseSchedule s = build_linear_schedule(kDefaultSteps, kDefaultEtaPerStep);
    const double y0v = -0.8;
    DeltaScoreOracle oracle(scalar_log_image(y0v), s);
    RandomSource rng(seed, 23);
    SamplerConfig cfg;
    cfg.method = SamplerMethod::ddim;
    cfg.k_start = s.K;
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
        const double eta = s.eta_at(s.K);
        const double start = y0v - 0.5 * eta + std::sqrt(eta) * rng.gaussian();
        const LogImage out = denoise_log(scalar_log_image(start), oracle, s, cfg, rng);
        worst = std::max(worst, std::abs(out.data[0] - y0v));
    }
    PropertyResult r;
    r.pass = worst < 1e-9;
    r.detail = fmt("max |y - y0| = %.2e (allow %.2e)", worst, 1e-9);
    return r;
}

// One DDIM step from a forward draw must preserve the k-1 marginal.
PropertyResult check_ddim_marginal(std::uint64_t seed) {
    const NoiseSchedule s = build_linear_schedule(kDefaultSteps, kDefaultEtaPerStep);
    const int k = 200;
    const double eta_k = s.eta_at(k);
    const double eta_p = s.eta_at(k - 1);
    const double y0v = -0.6;
    DeltaScoreOracle oracle(scalar_log_image(y0v), s);
    SamplerConfig cfg;
    cfg.method = SamplerMethod::ddim;
    cfg.zeta.assign(static_cast<std::size_t>(s.K) + 1, 0.0);
    cfg.zeta[k] = std::sqrt(0.5 * eta_p);
    const int n = 20000;
    RandomSource rng(seed, 24);
    std::vector<double> outs;
    outs.reserve(n);
    for (int t = 0; t < n; ++t) {
        const double yk = y0v - 0.5 * eta_k + std::sqrt(eta_k) * rng.gaussian();
        outs.push_back(ddim_step(scalar_log_image(yk), k, oracle, s, cfg, rng).data[0]);
    }
    const Moments m = moments(outs);
    const double se_mean = std::sqrt(eta_p / n);
    const double se_var = eta_p * std::sqrt(2.0 / (n - 1));
    const double mean_err = std::abs(m.mean - (y0v - 0.5 * eta_p));
    const double var_err = std::abs(m.var - eta_p);
    PropertyResult r;
    r.pass = mean_err < 5 * se_mean && var_err < 5 * se_var;
    r.detail = fmt("mean error %.2e (allow %.2e)", mean_err, 5 * se_mean) + ", " +
               fmt("variance error %.2e (allow %.2e)", var_err, 5 * se_var);
    return r;
}

// Central-difference check over a composite op chain.
PropertyResult check_gradients(std::uint64_t seed) {
    RandomSource rng(seed, 25);
    const int n = 12;
    std::vector<double> xv(n), wv(n);
    for (double& v : xv) v = 2.0 * rng.uniform() - 1.0;
    for (double& v : wv) v = 2.0 * rng.uniform() - 1.0;

    auto eval = [&](const std::vector<double>& x, const std::vector<double>& w) {
        Tape tape;
        const Tensor tx = tape.leaf({{n}}, x, true);
        const Tensor tw = tape.leaf({{n}}, w, true);
        const Tensor hidden = op_silu(tape, op_mul(tape, tx, tw));
        const Tensor loss = op_mean(tape, op_square(tape, op_add(tape, hidden, tx)));
        return tape.value(loss)[0];
    };

    Tape tape;
    const Tensor tx = tape.leaf({{n}}, xv, true);
    const Tensor tw = tape.leaf({{n}}, wv, true);
    const Tensor hidden = op_silu(tape, op_mul(tape, tx, tw));
    const Tensor loss = op_mean(tape, op_square(tape, op_add(tape, hidden, tx)));
    tape.backward(loss);
    const std::vector<double> gx = tape.grad(tx);
    const std::vector<double> gw = tape.grad(tw);

    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> xp = xv, xm = xv;
        xp[static_cast<std::size_t>(i)] += h;
        xm[static_cast<std::size_t>(i)] -= h;
        const double fd = (eval(xp, wv) - eval(xm, wv)) / (2 * h);
        const double ad = gx[static_cast<std::size_t>(i)];
        worst = std::max(worst, std::abs(ad - fd) / std::max({1e-6, std::abs(ad), std::abs(fd)}));

        std::vector<double> wp = wv, wm = wv;
        wp[static_cast<std::size_t>(i)] += h;
        wm[static_cast<std::size_t>(i)] -= h;
        const double fdw = (eval(xv, wp) - eval(xv, wm)) / (2 * h);
        const double adw = gw[static_cast<std::size_t>(i)];
        worst = std::max(worst,
                         std::abs(adw - fdw) / std::max({1e-6, std::abs(adw), std::abs(fdw)}));
    }
    PropertyResult r;
    r.pass = worst < 1e-4;
    r.detail = fmt("max relative gradient error %.2e (allow %.2e)", worst, 1e-4);
    return r;
}

} // namespace

int run_verify(std::uint64_t seed, const std::string& fault) {
    if (!fault.empty() && fault != "drift-sign")
        throw ConfigError("unknown fault mode '" + fault + "', expected drift-sign");
    const bool fault_drift = fault == "drift-sign";

    struct Entry {
        const char* name;
        std::function<PropertyResult()> run;
    };
    const std::vector<Entry> checks = {
        {"forward-kernel-moments", [&] { return check_forward_moments(seed, fault_drift); }},
        {"intensity-martingale", [&] { return check_martingale(seed, fault_drift); }},
        {"path-closed-form-agreement", [&] { return check_path_closed_form(seed); }},
        {"ddim-exact-recovery", [&] { return check_ddim_recovery(seed); }},
        {"ddim-marginal-preservation", [&] { return check_ddim_marginal(seed); }},
        {"gradient-checks", [&] { return check_gradients(seed); }},
    };

    bool all = true;
    for (const Entry& e : checks) {
        const PropertyResult r = e.run();
        std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", e.name, r.detail.c_str());
        all = all && r.pass;
    }
    std::printf("%s\n", all ? "verify: all properties pass" : "verify: FAILURES present");
    return all ? 0 : 1;
}

} // namespace gbmd::cli

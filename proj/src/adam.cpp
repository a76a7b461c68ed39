#include "gbmd/adam.hpp"

#include <cmath>
#include <string>

#include "gbmd/errors.hpp"

namespace gbmd {

void quantize_f32(std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

AdamState AdamState::init(std::span<const NamedParam> params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const NamedParam& p : params) {
        s.m.emplace_back(p.t.shape.numel(), 0.0);
        s.v.emplace_back(p.t.shape.numel(), 0.0);
    }
    return s;
}

void adam_step(Tape& tape, std::span<const NamedParam> params, AdamState& state,
               const AdamConfig& cfg) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ContractError("adam_step: state tracks " + std::to_string(state.m.size()) +
                            " tensors, got " + std::to_string(params.size()) + " parameters");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& g = tape.grad(params[i].t);
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != g.size() || v.size() != g.size()) {
            throw ContractError("adam_step: moment buffers for '" + params[i].name +
                                "' do not match the parameter shape");
        }
        auto& p = tape.leaf_value(params[i].t);
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        quantize_f32(p);
    }
}

} // namespace gbmd

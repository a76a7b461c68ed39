#pragma once

#include "gbmd/image.hpp"
#include "gbmd/schedule.hpp"

namespace gbmd {

// Anything that estimates the log-density gradient of the noised data at
// step k. Analytic oracles and trained networks both satisfy this contract;
// samplers and diagnostics depend only on it. Output shape equals input
// shape and is finite for finite input.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;
    virtual Volume evaluate(const LogImage& y, int k) const = 0;
};

// Exact score when the data distribution is a point mass at y0:
//   score(y, k) = -(y - y0 + eta(k)/2) / eta(k).
// Requires k >= 1 (the k = 0 kernel is degenerate).
Volume analytic_delta_score(const LogImage& y, int k, const LogImage& y0, const NoiseSchedule& s);

// Exact score when the data is elementwise Gaussian, y0 ~ N(mu0, var0):
//   score(y, k) = -(y - mu0 + eta(k)/2) / (var0 + eta(k)).
// Requires var0 + eta(k) > 0 everywhere.
Volume analytic_gaussian_score(const LogImage& y, int k, const Volume& mu0, const Volume& var0,
                               const NoiseSchedule& s);

// Isotropic convenience form: one variance shared by every element.
Volume analytic_gaussian_score(const LogImage& y, int k, const LogImage& mu0, double var0,
                               const NoiseSchedule& s);

// ScoreModel wrappers around the two oracles.
class DeltaScoreOracle final : public ScoreModel {
public:
    DeltaScoreOracle(LogImage y0, NoiseSchedule s) : y0_(std::move(y0)), s_(std::move(s)) {}
    Volume evaluate(const LogImage& y, int k) const override {
        return analytic_delta_score(y, k, y0_, s_);
    }

private:
    LogImage y0_;
    NoiseSchedule s_;
};

class GaussianScoreOracle final : public ScoreModel {
public:
    GaussianScoreOracle(Volume mu0, Volume var0, NoiseSchedule s)
        : mu0_(std::move(mu0)), var0_(std::move(var0)), s_(std::move(s)) {}
    GaussianScoreOracle(const LogImage& mu0, double var0, NoiseSchedule s)
        : mu0_{mu0.shape, mu0.data},
          var0_(Volume::full(mu0.shape, var0)),
          s_(std::move(s)) {}
    Volume evaluate(const LogImage& y, int k) const override {
        return analytic_gaussian_score(y, k, mu0_, var0_, s_);
    }

private:
    Volume mu0_;
    Volume var0_;
    NoiseSchedule s_;
};

} // namespace gbmd

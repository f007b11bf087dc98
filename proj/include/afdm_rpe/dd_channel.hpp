// dd_channel.hpp - doubly-dispersive channel operators and frame propagation
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "afdm_waveform.hpp"
#include "covariance.hpp"
#include "dd_operators.hpp"

namespace afdm_rpe {

struct PathParams {
    cd gain{1.0, 0.0};
    double delay_s = 0.0;
    double doppler_hz = 0.0;
    int delay_idx = 0;
    double doppler_norm = 0.0;
    double delay_residual = 0.0;  // |delay_idx - tau/T_S|
};

using PathSet = std::vector<PathParams>;

struct Target {
    double range_m = 0.0;
    double velocity_mps = 0.0;
};

struct Scene {
    double los_distance_m = 3.75;
    std::vector<Target> targets{{15.0, 37.0}};
    double gain_power = 1.0;
    int path_count() const { return 1 + static_cast<int>(targets.size()); }
};

// Largest admissible delay index and Doppler magnitude (the grid's span).
struct ChannelLimits {
    int max_delay_idx = 4;
    double f_max = 0.1;
};

enum class GainModel { ComplexGaussian, UnitMagnitude };

// Path on an exact (l, f) pair; gain given.
inline PathParams make_grid_path(const AfdmConfig& cfg, cd gain, int delay_idx, double doppler_norm) {
    PathParams p;
    p.gain = gain;
    p.delay_idx = delay_idx;
    p.doppler_norm = doppler_norm;
    p.delay_s = delay_idx * cfg.sample_period_s();
    p.doppler_hz = doppler_norm * cfg.sample_rate_hz / cfg.n_samples;
    return p;
}

// tau = R/c, nu = f_c v/c, l = round(tau/T_S), f = N nu/f_S.
inline PathParams physical_path(const AfdmConfig& cfg, const ChannelLimits& lim, double range_m,
                                double velocity_mps, cd gain) {
    if (!(range_m >= 0.0)) throw std::invalid_argument("scene_to_paths: range must be >= 0");
    if (!std::isfinite(velocity_mps)) throw std::invalid_argument("scene_to_paths: velocity must be finite");
    PathParams p;
    p.gain = gain;
    p.delay_s = range_m / kSpeedOfLight;
    p.doppler_hz = cfg.carrier_hz * velocity_mps / kSpeedOfLight;
    const double lf = p.delay_s / cfg.sample_period_s();
    p.delay_idx = static_cast<int>(std::lround(lf));
    p.delay_residual = std::abs(p.delay_idx - lf);
    p.doppler_norm = cfg.n_samples * p.doppler_hz / cfg.sample_rate_hz;
    if (p.delay_idx > lim.max_delay_idx)
        throw std::out_of_range("scene_to_paths: delay index " + std::to_string(p.delay_idx) +
                                " exceeds max " + std::to_string(lim.max_delay_idx));
    if (std::abs(p.doppler_norm) > lim.f_max + 1e-12)
        throw std::out_of_range("scene_to_paths: normalized Doppler " + std::to_string(p.doppler_norm) +
                                " exceeds f_max " + std::to_string(lim.f_max));
    return p;
}

template <class Rng>
cd draw_gain(double power, Rng& rng) {
    std::normal_distribution<double> g(0.0, std::sqrt(power / 2.0));
    const double re = g(rng);
    const double im = g(rng);
    return {re, im};
}

// LoS first (static), then targets in scene order.
template <class Rng>
PathSet scene_to_paths(const Scene& scene, const AfdmConfig& cfg, const ChannelLimits& lim, Rng& rng,
                       GainModel model = GainModel::ComplexGaussian) {
    auto gain = [&]() -> cd {
        if (model == GainModel::UnitMagnitude) return {std::sqrt(scene.gain_power), 0.0};
        return draw_gain(scene.gain_power, rng);
    };
    PathSet ps;
    ps.push_back(physical_path(cfg, lim, scene.los_distance_m, 0.0, gain()));
    for (const auto& t : scene.targets) ps.push_back(physical_path(cfg, lim, t.range_m, t.velocity_mps, gain()));
    return ps;
}

inline PathSet scene_to_paths(const Scene& scene, const AfdmConfig& cfg, const ChannelLimits& lim,
                              std::uint64_t seed, GainModel model = GainModel::ComplexGaussian) {
    std::mt19937_64 rng(seed);
    return scene_to_paths(scene, cfg, lim, rng, model);
}

// Psi = sum_p h_p Phi_p Omega^{f_p} Pi^{l_p}
inline CMat time_domain_channel(const AfdmConfig& cfg, const PathSet& paths) {
    CMat psi = CMat::Zero(cfg.n_samples, cfg.n_samples);
    for (const auto& p : paths) psi += p.gain * time_domain_path(cfg, p.delay_idx, p.doppler_norm);
    return psi;
}

inline CMat build_daft_path_operator(const AfdmConfig& cfg, const PathParams& path) {
    const CMat a = build_daft_matrix(cfg);
    return build_daft_path_operator(a, cfg, path.delay_idx, path.doppler_norm);
}

// G = sum_p h_p Gamma_p
inline CMat build_effective_channel(const CMat& daft, const AfdmConfig& cfg, const PathSet& paths) {
    if (paths.empty()) throw std::invalid_argument("build_effective_channel: empty path set");
    CMat g = CMat::Zero(cfg.n_samples, cfg.n_samples);
    for (const auto& p : paths) g += p.gain * build_daft_path_operator(daft, cfg, p.delay_idx, p.doppler_norm);
    return g;
}

inline CMat build_effective_channel(const AfdmConfig& cfg, const PathSet& paths) {
    return build_effective_channel(build_daft_matrix(cfg), cfg, paths);
}

struct FrameBatch {
    CMat tx_symbols;
    ReceivedFrames rx;
    int frame_count() const { return rx.frame_count(); }
    double noise_power() const { return rx.noise_power; }
    const CMat& rx_daft() const { return rx.rx_daft; }
};

template <class Rng>
void add_awgn(CMat& y, double noise_power, Rng& rng) {
    if (noise_power <= 0.0) return;
    std::normal_distribution<double> g(0.0, std::sqrt(noise_power / 2.0));
    for (Eigen::Index t = 0; t < y.cols(); ++t)
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            const double re = g(rng);
            const double im = g(rng);
            y(i, t) += cd(re, im);
        }
}

// Y = G X + W
template <class Rng>
FrameBatch propagate_frames(const CMat& g, const CMat& x, double noise_power, Rng& rng) {
    if (x.cols() < 1) throw std::invalid_argument("propagate_frames: need at least one frame");
    if (x.rows() != g.cols())
        throw std::invalid_argument("propagate_frames: X has " + std::to_string(x.rows()) + " rows, channel expects " +
                                    std::to_string(g.cols()));
    if (noise_power < 0.0) throw std::invalid_argument("propagate_frames: noise_power must be >= 0");
    FrameBatch b;
    b.tx_symbols = x;
    b.rx.noise_power = noise_power;
    b.rx.rx_daft.noalias() = g * x;
    add_awgn(b.rx.rx_daft, noise_power, rng);
    return b;
}

inline FrameBatch propagate_frames(const AfdmConfig& cfg, const PathSet& paths, const CMat& x, double noise_power,
                                   std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return propagate_frames(build_effective_channel(cfg, paths), x, noise_power, rng);
}

// Noise-free T -> infinity covariance G G^H, via the double-sum form over path operators.
inline CovarianceObservation perfect_covariance(const PathSet& paths, const AfdmConfig& cfg) {
    if (paths.empty()) throw std::invalid_argument("perfect_covariance: empty path set");
    const CMat a = build_daft_matrix(cfg);
    std::vector<CMat> ops;
    std::vector<cd> gains;
    for (const auto& p : paths) {
        ops.push_back(build_daft_path_operator(a, cfg, p.delay_idx, p.doppler_norm));
        gains.push_back(p.gain);
    }
    return make_observation(perfect_covariance_double_sum(ops, gains), 0, true);
}

}  // namespace afdm_rpe

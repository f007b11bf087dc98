// experiment.hpp - Monte-Carlo SNR / frame-count sweep and RMSE bookkeeping
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "afdm_waveform.hpp"
#include "covariance.hpp"
#include "dd_channel.hpp"
#include "dictionary.hpp"
#include "sparse_estimator.hpp"

namespace afdm_rpe {

// frame_counts entry standing for T -> infinity (noise-free G G^H)
inline constexpr int kPerfectFrames = 0;

struct GridParams {
    int k_tau = 5;
    int d_nu = 5;
    double f_max = 0.1;
};

struct ExperimentConfig {
    AfdmConfig afdm;
    Scene scene;
    GainModel gain_model = GainModel::ComplexGaussian;
    GridParams grid;
    Hyperparams hyper;
    std::vector<double> snr_db_list{0, 5, 10, 15, 20, 25, 30};
    std::vector<int> frame_counts{200, 2000, kPerfectFrames};
    int trials = 200;
    std::uint64_t seed = 1;
    std::string output_path = "rpe_results.csv";
    std::string plot_dir;
    std::string dict_cache;
    bool strict = false;
    // receiver assumes sigma^2 (1 + eps)
    double noise_power_error = 0.0;

    ChannelLimits limits() const { return {grid.k_tau - 1, grid.f_max}; }

    void validate() const {
        afdm.validate();
        hyper.validate();
        if (trials < 1) throw std::invalid_argument("trials must be >= 1");
        if (snr_db_list.empty()) throw std::invalid_argument("snr_db_list must be nonempty");
        if (frame_counts.empty()) throw std::invalid_argument("frame_counts must be nonempty");
        for (int t : frame_counts)
            if (t < 0) throw std::invalid_argument("frame_counts entries must be >= 1 or \"perfect\"");
        if (grid.k_tau < 1 || grid.d_nu < 1 || !(grid.f_max > 0.0))
            throw std::invalid_argument("grid sizes must be >= 1 and f_max > 0");
        if (!(scene.gain_power > 0.0)) throw std::invalid_argument("scene.gain_power must be > 0");
    }
};

struct RmseRecord {
    double snr_db = 0.0;
    int frames = 0;
    double range_rmse_m = 0.0;
    double velocity_rmse_mps = 0.0;
    double detection_rate = 0.0;
    int trials = 0;
    int nonconverged = 0;
};

// sigma_W^2 = (P+1) sigma_h^2 / SNR
inline double snr_to_noise_power(double snr_linear, int p, double sigma_h_sq) {
    if (!(snr_linear > 0.0)) throw std::invalid_argument("snr_to_noise_power: SNR must be > 0");
    if (p < 0) throw std::invalid_argument("snr_to_noise_power: P must be >= 0");
    return (p + 1) * sigma_h_sq / snr_linear;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// sqrt(mean (est - truth)^2)
inline double rmse_metric(const std::vector<double>& estimates, const std::vector<double>& truths) {
    if (estimates.empty() || estimates.size() != truths.size())
        throw std::invalid_argument("rmse_metric: need equally sized nonempty inputs");
    double s = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) s += (estimates[i] - truths[i]) * (estimates[i] - truths[i]);
    return std::sqrt(s / static_cast<double>(estimates.size()));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t snr_idx, std::uint64_t trial) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ snr_idx);
    return splitmix64(h ^ trial);
}

struct TruthPoint {
    double delay = 0.0;  // in samples, unrounded
    double doppler = 0.0;
};

// Detections (strongest first) each take the nearest still-free truth in
// (delay, Doppler / grid step) space. Returns, per truth, the detection index or -1.
inline std::vector<int> associate(const std::vector<Detection>& dets, const std::vector<TruthPoint>& truths,
                                  double doppler_step) {
    std::vector<int> owner(truths.size(), -1);
    const double fs = doppler_step > 0.0 ? doppler_step : 1.0;
    for (std::size_t k = 0; k < dets.size(); ++k) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < truths.size(); ++p) {
            if (owner[p] >= 0) continue;
            const double dl = dets[k].delay_idx - truths[p].delay;
            const double df = (dets[k].doppler_norm - truths[p].doppler) / fs;
            const double d2 = dl * dl + df * df;
            if (d2 < bd) {
                bd = d2;
                best = static_cast<int>(p);
            }
        }
        if (best < 0) break;
        owner[best] = static_cast<int>(k);
    }
    return owner;
}

struct TrialOutcome {
    std::vector<double> range_sq_err;     // per matched target
    std::vector<double> velocity_sq_err;  // per matched target
    int targets = 0;
    int matched = 0;
    bool converged = true;
};

// Everything fixed across trials.
struct ExperimentContext {
    ExperimentConfig cfg;
    Dictionary dict;
    CMat daft;
};

inline ExperimentContext make_context(const ExperimentConfig& cfg) {
    cfg.validate();
    const DelayDopplerGrid grid = build_grid(cfg.grid.k_tau, cfg.grid.d_nu, cfg.grid.f_max);
    return {cfg, load_or_build_dictionary(cfg.afdm, grid, cfg.dict_cache), build_daft_matrix(cfg.afdm)};
}

// frames == kPerfectFrames feeds G G^H directly.
inline TrialOutcome run_trial(const ExperimentContext& ctx, double noise_power, int frames, std::uint64_t seed) {
    const ExperimentConfig& cfg = ctx.cfg;
    std::mt19937_64 rng(seed);
    const PathSet paths = scene_to_paths(cfg.scene, cfg.afdm, cfg.limits(), rng, cfg.gain_model);
    const CMat g = build_effective_channel(ctx.daft, cfg.afdm, paths);

    RpeResult est;
    if (frames == kPerfectFrames) {
        est = run_blind_rpe(perfect_covariance_from_channel(g), ctx.dict, cfg.hyper, cfg.afdm);
    } else {
        const CMat x = draw_qam_block(cfg.afdm.n_samples, frames, cfg.afdm.constellation_order, rng);
        FrameBatch batch = propagate_frames(g, x, noise_power, rng);
        batch.rx.noise_power = noise_power * (1.0 + cfg.noise_power_error);
        est = run_blind_rpe(batch.rx, ctx.dict, cfg.hyper, cfg.afdm);
    }

    std::vector<TruthPoint> truths;
    for (const auto& p : paths) truths.push_back({p.delay_s / cfg.afdm.sample_period_s(), p.doppler_norm});
    const auto owner = associate(est.detections, truths, ctx.dict.grid.doppler_step());
    TrialOutcome out;
    out.converged = est.diagnostics.converged;
    for (std::size_t p = 1; p < paths.size(); ++p) {
        ++out.targets;
        if (owner[p] < 0) continue;
        ++out.matched;
        const auto k = static_cast<std::size_t>(owner[p]);
        const Target& tgt = cfg.scene.targets[p - 1];
        const double dr = est.range_hat[k] - tgt.range_m;
        const double dv = est.velocity_hat[k] - tgt.velocity_mps;
        out.range_sq_err.push_back(dr * dr);
        out.velocity_sq_err.push_back(dv * dv);
    }
    return out;
}

using ProgressFn = std::function<void(const RmseRecord&)>;

inline std::vector<RmseRecord> run_experiment(const ExperimentContext& ctx, const ProgressFn& progress = {}) {
    const ExperimentConfig& cfg = ctx.cfg;
    const int p = static_cast<int>(cfg.scene.targets.size());
    std::vector<RmseRecord> out;
    for (std::size_t si = 0; si < cfg.snr_db_list.size(); ++si) {
        const double snr_db = cfg.snr_db_list[si];
        const double sigma2 = snr_to_noise_power(db_to_linear(snr_db), p, cfg.scene.gain_power);
        for (const int frames : cfg.frame_counts) {
            double rs = 0.0, vs = 0.0;
            long matched = 0, targets = 0;
            RmseRecord rec;
            rec.snr_db = snr_db;
            rec.frames = frames;
            rec.trials = cfg.trials;
            for (int k = 0; k < cfg.trials; ++k) {
                // same scene draw for every frame count, so the T comparison is paired
                const TrialOutcome o = run_trial(ctx, sigma2, frames, trial_seed(cfg.seed, si, k));
                for (double e : o.range_sq_err) rs += e;
                for (double e : o.velocity_sq_err) vs += e;
                matched += o.matched;
                targets += o.targets;
                if (!o.converged) ++rec.nonconverged;
            }
            const double nan = std::numeric_limits<double>::quiet_NaN();
            rec.range_rmse_m = matched > 0 ? std::sqrt(rs / matched) : nan;
            rec.velocity_rmse_mps = matched > 0 ? std::sqrt(vs / matched) : nan;
            rec.detection_rate = targets > 0 ? static_cast<double>(matched) / targets : 1.0;
            out.push_back(rec);
            if (progress) progress(rec);
        }
    }
    return out;
}

inline std::vector<RmseRecord> run_experiment(const ExperimentConfig& cfg) { return run_experiment(make_context(cfg)); }

inline std::string frames_token(int frames) {
    return frames == kPerfectFrames ? std::string("perfect") : std::to_string(frames);
}

inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string format_csv(const std::vector<RmseRecord>& recs) {
    std::ostringstream os;
    os << "snr_db,frames,range_rmse_m,velocity_rmse_mps,detection_rate,trials\n";
    for (const auto& r : recs)
        os << fmt_num(r.snr_db) << ',' << frames_token(r.frames) << ',' << fmt_num(r.range_rmse_m) << ','
           << fmt_num(r.velocity_rmse_mps) << ',' << fmt_num(r.detection_rate) << ',' << r.trials << '\n';
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << text;
    if (!os) throw std::runtime_error("write failed for " + path);
}

// One whitespace-delimited file per frame count: snr range velocity detection_rate.
inline std::vector<std::string> write_plot_data(const std::vector<RmseRecord>& recs, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<int> seen;
    std::vector<std::string> files;
    for (const auto& r : recs) {
        if (std::find(seen.begin(), seen.end(), r.frames) != seen.end()) continue;
        seen.push_back(r.frames);
        std::ostringstream os;
        os << "# snr_db range_rmse_m velocity_rmse_mps detection_rate  (frames=" << frames_token(r.frames) << ")\n";
        for (const auto& q : recs)
            if (q.frames == r.frames)
                os << fmt_num(q.snr_db) << ' ' << fmt_num(q.range_rmse_m) << ' ' << fmt_num(q.velocity_rmse_mps) << ' '
                   << fmt_num(q.detection_rate) << '\n';
        const std::string path = (std::filesystem::path(dir) / ("rmse_T" + frames_token(r.frames) + ".dat")).string();
        write_text(path, os.str());
        files.push_back(path);
    }
    return files;
}

}  // namespace afdm_rpe

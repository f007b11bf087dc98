// covariance.hpp - modified sample covariance and its row-sum observation
#pragma once

#include <stdexcept>
#include <vector>

#include "afdm_waveform.hpp"

namespace afdm_rpe {

// What a blind receiver gets to see.
struct ReceivedFrames {
    CMat rx_daft;
    double noise_power = 0.0;
    int frame_count() const { return static_cast<int>(rx_daft.cols()); }
};

struct CovarianceObservation {
    CMat modified_cov;
    CVec row_sum;
    int frames_used = 0;
    bool is_perfect = false;
};

inline CVec row_sum_observation(const CMat& cov) { return cov.rowwise().sum(); }

inline CovarianceObservation make_observation(CMat cov, int frames, bool perfect) {
    CovarianceObservation o;
    o.modified_cov = 0.5 * (cov + cov.adjoint());
    o.row_sum = row_sum_observation(o.modified_cov);
    o.frames_used = frames;
    o.is_perfect = perfect;
    return o;
}

// R = Y Y^H / T - sigma^2 I, Hermitian-symmetrized.
inline CovarianceObservation modified_sample_covariance(const CMat& y, double noise_power) {
    if (y.cols() < 1) throw std::invalid_argument("modified_sample_covariance: T must be >= 1");
    if (noise_power < 0.0) throw std::invalid_argument("modified_sample_covariance: noise_power must be >= 0");
    const auto t = static_cast<double>(y.cols());
    CMat r = CMat::Zero(y.rows(), y.rows());
    r.selfadjointView<Eigen::Lower>().rankUpdate(y, 1.0 / t);
    r = r.selfadjointView<Eigen::Lower>();
    r.diagonal().array() -= noise_power;
    return make_observation(std::move(r), static_cast<int>(y.cols()), false);
}

// Double-sum form sum_p sum_q h_p h_q^* Gamma_p Gamma_q^H.
inline CMat perfect_covariance_double_sum(const std::vector<CMat>& ops, const std::vector<cd>& gains) {
    if (ops.empty() || ops.size() != gains.size())
        throw std::invalid_argument("perfect_covariance: operator/gain count mismatch or empty");
    const auto n = ops.front().rows();
    CMat r = CMat::Zero(n, n);
    for (std::size_t p = 0; p < ops.size(); ++p)
        for (std::size_t q = 0; q < ops.size(); ++q)
            r += (gains[p] * std::conj(gains[q])) * (ops[p] * ops[q].adjoint());
    return r;
}

// Outer-product form G G^H.
inline CMat perfect_covariance_outer(const std::vector<CMat>& ops, const std::vector<cd>& gains) {
    if (ops.empty() || ops.size() != gains.size())
        throw std::invalid_argument("perfect_covariance: operator/gain count mismatch or empty");
    CMat g = CMat::Zero(ops.front().rows(), ops.front().cols());
    for (std::size_t p = 0; p < ops.size(); ++p) g += gains[p] * ops[p];
    return g * g.adjoint();
}

inline CovarianceObservation modified_sample_covariance(const ReceivedFrames& rx) {
    return modified_sample_covariance(rx.rx_daft, rx.noise_power);
}

inline CovarianceObservation perfect_covariance_from_channel(const CMat& g) {
    return make_observation(g * g.adjoint(), 0, true);
}

}  // namespace afdm_rpe

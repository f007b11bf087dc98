// afdm_waveform.hpp - DAFT transform, AFDM modulation and QAM frame generation
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace afdm_rpe {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// e^{-j 2 pi phase}
inline cd unit_phasor(double phase) {
    const double a = -kTwoPi * phase;
    return {std::cos(a), std::sin(a)};
}

// Orthogonality-preserving time chirp (2*ceil(f_max)+1)/(2N).
inline double default_c1(int n, double f_max) {
    return (2.0 * std::ceil(f_max) + 1.0) / (2.0 * n);
}

// Irrational frequency chirp. With c2 = 0 the probe A^H 1 degenerates to a
// scaled unit vector and every Doppler hypothesis yields the same dictionary
// column up to a constant.
inline double default_c2(int n) { return std::numbers::sqrt2 / (2.0 * n); }

struct AfdmConfig {
    int n_samples = 64;
    double c1 = default_c1(64, 0.1);
    double c2 = default_c2(64);
    double sample_rate_hz = 20e6;
    double carrier_hz = 70e9;
    int constellation_order = 4;

    double sample_period_s() const { return 1.0 / sample_rate_hz; }
    double subcarrier_spacing_hz() const { return sample_rate_hz / n_samples; }

    void validate() const {
        if (n_samples < 2) throw std::invalid_argument("AfdmConfig: n_samples must be >= 2");
        if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("AfdmConfig: sample_rate_hz must be > 0");
        if (!(carrier_hz > 0.0)) throw std::invalid_argument("AfdmConfig: carrier_hz must be > 0");
        if (!std::isfinite(c1) || !std::isfinite(c2))
            throw std::invalid_argument("AfdmConfig: chirp rates must be finite");
    }
};

struct SymbolFrame {
    CVec symbols;
    double average_energy = 1.0;
};

// Diagonal of Lambda_c = diag(e^{-j2pi c n^2}), n = 0..N-1.
inline CVec build_chirp_diag(int n, double c) {
    if (n < 1) throw std::invalid_argument("build_chirp_diag: n must be >= 1");
    CVec d(n);
    for (int i = 0; i < n; ++i) {
        // reduce c*i^2 modulo 1 before the trig call, i^2 gets large
        const double ph = c * static_cast<double>(i) * static_cast<double>(i);
        d(i) = unit_phasor(ph - std::floor(ph));
    }
    return d;
}

// Normalized DFT, F(k,n) = e^{-j2pi kn/N}/sqrt(N).
inline CMat build_dft_matrix(int n) {
    CMat f(n, n);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            f(k, i) = s * unit_phasor(static_cast<double>((static_cast<long long>(k) * i) % n) / n);
    return f;
}

// A = Lambda2 F Lambda1
inline CMat build_daft_matrix(const AfdmConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_samples;
    const CVec l1 = build_chirp_diag(n, cfg.c1);
    const CVec l2 = build_chirp_diag(n, cfg.c2);
    CMat a = build_dft_matrix(n);
    return l2.asDiagonal() * a * l1.asDiagonal();
}

// s = A^H x
inline CVec modulate(const CMat& daft, const CVec& x) {
    if (x.size() != daft.cols())
        throw std::invalid_argument("modulate: expected " + std::to_string(daft.cols()) +
                                    " symbols, got " + std::to_string(x.size()));
    return daft.adjoint() * x;
}

inline CVec modulate(const SymbolFrame& x, const AfdmConfig& cfg) {
    return modulate(build_daft_matrix(cfg), x.symbols);
}

// y = A r
inline CVec demodulate(const CMat& daft, const CVec& r) {
    if (r.size() != daft.cols())
        throw std::invalid_argument("demodulate: expected " + std::to_string(daft.cols()) +
                                    " samples, got " + std::to_string(r.size()));
    return daft * r;
}

inline CVec demodulate(const CVec& r, const AfdmConfig& cfg) {
    return demodulate(build_daft_matrix(cfg), r);
}

inline int qam_side(int order) {
    if (order < 4) return -1;
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
    if (side * side != order) return -1;
    // power of 4: side is a power of two
    if ((side & (side - 1)) != 0) return -1;
    return side;
}

// Unit-average-energy square QAM alphabet, row-major over (I, Q) levels.
inline CVec qam_alphabet(int order) {
    const int side = qam_side(order);
    if (side < 0)
        throw std::invalid_argument("qam_alphabet: order " + std::to_string(order) +
                                    " is not a square QAM order (power of 4)");
    // levels -(side-1), ..., side-1 step 2; mean energy 2(side^2-1)/3
    const double norm = std::sqrt(2.0 * (side * side - 1) / 3.0);
    CVec pts(order);
    for (int i = 0; i < side; ++i)
        for (int q = 0; q < side; ++q)
            pts(i * side + q) = cd(2 * i - side + 1, 2 * q - side + 1) / norm;
    return pts;
}

// N x T block of i.i.d. QAM symbols drawn from an existing generator.
template <class Rng>
CMat draw_qam_block(int n, int frames, int order, Rng& rng) {
    const CVec pts = qam_alphabet(order);
    std::uniform_int_distribution<int> pick(0, order - 1);
    CMat x(n, frames);
    for (int t = 0; t < frames; ++t)
        for (int i = 0; i < n; ++i) x(i, t) = pts(pick(rng));
    return x;
}

inline SymbolFrame draw_qam_frame(const AfdmConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SymbolFrame f;
    f.symbols = draw_qam_block(cfg.n_samples, 1, cfg.constellation_order, rng).col(0);
    f.average_energy = 1.0;
    return f;
}

}  // namespace afdm_rpe

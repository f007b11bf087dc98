// dd_operators.hpp - shift, Doppler and CPP phase operators of one delay-Doppler tap
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "afdm_waveform.hpp"

namespace afdm_rpe {

// Pi^l with pi_{i,j} = delta_{i,j+1} + delta_{i,j-(N-1)}: (Pi^l x)_i = x_{(i-l) mod N}.
inline Eigen::MatrixXd build_shift_matrix(int n, int ell) {
    if (n < 1) throw std::invalid_argument("build_shift_matrix: n must be >= 1");
    if (ell < 0 || ell >= n)
        throw std::out_of_range("build_shift_matrix: ell=" + std::to_string(ell) + " outside [0, " +
                                std::to_string(n) + ")");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) p((j + ell) % n, j) = 1.0;
    return p;
}

// Diagonal of Omega^f = diag(e^{-j2pi f k/N}).
inline CVec build_doppler_diag(int n, double f) {
    if (n < 1) throw std::invalid_argument("build_doppler_diag: n must be >= 1");
    CVec d(n);
    for (int k = 0; k < n; ++k) d(k) = unit_phasor(f * k / n);
    return d;
}

// Diagonal of the CPP phase matrix: entries 0..l-1 carry c1(N^2 - 2N m), m = l..1.
inline CVec build_cpp_phase_diag(const AfdmConfig& cfg, int ell) {
    const int n = cfg.n_samples;
    if (ell < 0 || ell >= n)
        throw std::out_of_range("build_cpp_phase_diag: ell=" + std::to_string(ell) + " outside [0, " +
                                std::to_string(n) + ")");
    CVec d = CVec::Ones(n);
    for (int i = 0; i < ell; ++i) {
        const double m = ell - i;
        const double ph = cfg.c1 * (static_cast<double>(n) * n - 2.0 * n * m);
        d(i) = unit_phasor(ph - std::floor(ph));
    }
    return d;
}

// Phi Omega^f Pi^l as a dense matrix (time domain).
inline CMat time_domain_path(const AfdmConfig& cfg, int ell, double f) {
    const int n = cfg.n_samples;
    const CVec phi = build_cpp_phase_diag(cfg, ell);
    const CVec om = build_doppler_diag(n, f);
    CMat m = CMat::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        const int i = (j + ell) % n;
        m(i, j) = phi(i) * om(i);
    }
    return m;
}

// Gamma = A (Phi Omega Pi) A^H
inline CMat build_daft_path_operator(const CMat& daft, const AfdmConfig& cfg, int ell, double f) {
    return daft * time_domain_path(cfg, ell, f) * daft.adjoint();
}

}  // namespace afdm_rpe

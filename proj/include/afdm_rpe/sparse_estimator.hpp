// sparse_estimator.hpp - blind delay/Doppler recovery from the covariance row-sum
//
// Pipeline: l1 init, a few fractional-programming reweighted solves over the PSD
// cone, then support extraction on the grid. Only CovarianceObservation /
// ReceivedFrames and the dictionary enter here.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "afdm_waveform.hpp"
#include "covariance.hpp"
#include "dictionary.hpp"

namespace afdm_rpe {

enum class LassoSolver { InteriorPoint, Fista };
enum class PsdSolver { Admm, ProjectedGradient };
enum class SupportRule { Anchored, PerPoint };

struct Hyperparams {
    double beta = 1.0;
    double eta = 0.1;
    double alpha = 1e-3;
    int max_iters = 3;
    double inner_tol = 1e-6;
    double support_threshold = 0.5;

    int lasso_max_iters = 500;
    int fp_max_iters = 300;
    LassoSolver lasso_solver = LassoSolver::InteriorPoint;
    PsdSolver psd_solver = PsdSolver::Admm;
    // r is rescaled so that tr(R)/N equals this before solving; 0 keeps raw units
    double scale_target = 16.0;
    SupportRule support_rule = SupportRule::Anchored;
    int min_delay_separation = 1;
    // >0: keep exactly this many points (oracle mode, target count known)
    int top_k = 0;

    void validate() const {
        if (!(beta > 0.0)) throw std::invalid_argument("Hyperparams: beta must be > 0");
        if (!(eta > 0.0)) throw std::invalid_argument("Hyperparams: eta must be > 0");
        if (!(alpha > 0.0)) throw std::invalid_argument("Hyperparams: alpha must be > 0");
        if (max_iters < 0) throw std::invalid_argument("Hyperparams: max_iters must be >= 0");
        if (!(inner_tol > 0.0)) throw std::invalid_argument("Hyperparams: inner_tol must be > 0");
        if (!(support_threshold > 0.0 && support_threshold < 1.0))
            throw std::invalid_argument("Hyperparams: support_threshold must lie in (0,1)");
        if (lasso_max_iters < 1 || fp_max_iters < 1)
            throw std::invalid_argument("Hyperparams: iteration caps must be >= 1");
        if (scale_target < 0.0) throw std::invalid_argument("Hyperparams: scale_target must be >= 0");
        if (min_delay_separation < 0) throw std::invalid_argument("Hyperparams: min_delay_separation must be >= 0");
        if (top_k < 0) throw std::invalid_argument("Hyperparams: top_k must be >= 0");
    }
};

// vec(H) with H(g, g') at g*M + g'.
struct GramEstimate {
    CVec vectorized;
    int grid_size = 0;

    GramEstimate() = default;
    GramEstimate(CVec v, int m) : vectorized(std::move(v)), grid_size(m) {
        if (vectorized.size() != static_cast<Eigen::Index>(m) * m)
            throw std::invalid_argument("GramEstimate: vector length is not M^2");
    }
    CMat matrix() const {
        CMat h(grid_size, grid_size);
        for (int g = 0; g < grid_size; ++g)
            for (int gp = 0; gp < grid_size; ++gp) h(g, gp) = vectorized(g * grid_size + gp);
        return h;
    }
    static GramEstimate from_matrix(const CMat& h) {
        const int m = static_cast<int>(h.rows());
        CVec v(static_cast<Eigen::Index>(m) * m);
        for (int g = 0; g < m; ++g)
            for (int gp = 0; gp < m; ++gp) v(g * m + gp) = h(g, gp);
        return {std::move(v), m};
    }
};

struct SolverStatus {
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
};

struct SolveResult {
    GramEstimate estimate;
    SolverStatus status;
};

struct Detection {
    int grid_index = 0;
    int delay_idx = 0;
    double doppler_norm = 0.0;
    double magnitude = 0.0;
};

struct RpeDiagnostics {
    double scale = 1.0;  // factor applied to r
    SolverStatus lasso;
    std::vector<SolverStatus> fp;
    std::vector<double> objective_trace;  // data fit + eta * smooth l0, after init and each FP pass
    std::vector<double> point_scores;
    bool converged = true;
};

struct RpeResult {
    std::vector<Detection> detections;
    std::vector<double> tau_hat;
    std::vector<double> nu_hat;
    std::vector<double> range_hat;
    std::vector<double> velocity_hat;
    GramEstimate estimate;
    RpeDiagnostics diagnostics;
};

// ---- small pieces --------------------------------------------------------------

inline cd complex_soft_threshold(cd z, double t) {
    const double m = std::abs(z);
    if (m <= t) return {0.0, 0.0};
    return z * ((m - t) / m);
}

inline double data_fit(const CMat& e, const CVec& r, const CVec& x) { return (r - e * x).squaredNorm(); }

// sum |b|^2 / (|b|^2 + alpha)
inline double l0_approx(const CVec& b, double alpha) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double p = std::norm(b(i));
        s += p / (p + alpha);
    }
    return s;
}

// alpha_n = sqrt(alpha) / (|b_n|^2 + alpha); the weight matrix is diag(alpha_n^2)
inline Eigen::VectorXd fp_auxiliary(const CVec& anchor, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("fp_auxiliary: alpha must be > 0");
    Eigen::VectorXd a(anchor.size());
    const double sa = std::sqrt(alpha);
    for (Eigen::Index i = 0; i < anchor.size(); ++i) a(i) = sa / (std::norm(anchor(i)) + alpha);
    return a;
}

inline Eigen::VectorXd fp_weight_matrix(const GramEstimate& current, double alpha) {
    return fp_auxiliary(current.vectorized, alpha).array().square().matrix();
}

// N - sum(2 a sqrt(alpha) - a^2 |b|^2 - a^2 alpha), a = auxiliary from the anchor.
inline double surrogate_l0(const CVec& b, const Eigen::VectorXd& aux, double alpha) {
    if (b.size() != aux.size()) throw std::invalid_argument("surrogate_l0: size mismatch");
    const double sa = std::sqrt(alpha);
    double s = 0.0;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        const double a = aux(i);
        s += 2.0 * a * sa - a * a * std::norm(b(i)) - a * a * alpha;
    }
    return static_cast<double>(b.size()) - s;
}

inline CMat psd_project(const CMat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("psd_project: matrix is not square");
    const CMat h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(h);
    if (es.info() != Eigen::Success) throw std::runtime_error("psd_project: eigensolver failed");
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

inline CVec psd_project_vec(const CVec& v, int m) {
    return GramEstimate::from_matrix(psd_project(GramEstimate(v, m).matrix())).vectorized;
}

inline double spectral_norm_sq(const CMat& e) {
    Eigen::SelfAdjointEigenSolver<CMat> es(e * e.adjoint(), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// ---- l1 initialisation ---------------------------------------------------------

// min ||r - E x||^2 + beta * sum w|x|, accelerated proximal gradient from zero.
inline std::pair<CVec, SolverStatus> lasso_fista(const CMat& e, const CVec& r, double beta,
                                                 const Eigen::VectorXd& w, int max_iters, double tol) {
    const double lip = 2.0 * spectral_norm_sq(e);
    const Eigen::Index n = e.cols();
    CVec x = CVec::Zero(n), y = x, xn(n);
    double t = 1.0;
    double f_old = r.squaredNorm();
    SolverStatus st;
    if (lip <= 0.0) {
        st.converged = true;
        st.objective = f_old;
        return {x, st};
    }
    for (int it = 1; it <= max_iters; ++it) {
        const CVec grad = 2.0 * (e.adjoint() * (e * y - r));
        const CVec z = y - grad / lip;
        for (Eigen::Index j = 0; j < n; ++j) xn(j) = complex_soft_threshold(z(j), beta * w(j) / lip);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = xn + ((t - 1.0) / tn) * (xn - x);
        x = xn;
        t = tn;
        const double f = data_fit(e, r, x) + beta * (w.array() * x.array().abs()).sum();
        st.iterations = it;
        st.objective = f;
        if (std::abs(f_old - f) <= tol * std::max(std::abs(f_old), 1e-300)) {
            st.converged = true;
            break;
        }
        f_old = f;
    }
    return {x, st};
}

// Same problem by a log-barrier Newton method on the second-order cones |x_j| <= t_j.
// Each Newton system is reduced to a 2N x 2N solve with Woodbury, so the cost does
// not depend on how ill-conditioned E^H E is.
inline std::pair<CVec, SolverStatus> lasso_interior_point(const CMat& e, const CVec& r, double beta,
                                                          const Eigen::VectorXd& w, int max_newton, double tol) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const Eigen::Index nr = e.rows();
    const Eigen::Index m = e.cols();
    MatrixXd er(2 * nr, 2 * m);
    for (Eigen::Index j = 0; j < m; ++j) {
        er.col(2 * j) << e.col(j).real(), e.col(j).imag();
        er.col(2 * j + 1) << -e.col(j).imag(), e.col(j).real();
    }
    VectorXd rt(2 * nr);
    rt << r.real(), r.imag();

    VectorXd x = VectorXd::Zero(2 * m);  // interleaved (re, im)
    const double t0 = std::max(1.0, (e.adjoint() * r).cwiseAbs().maxCoeff() / std::max<double>(1.0, nr));
    VectorXd t = VectorXd::Constant(m, t0);
    const double rn = rt.squaredNorm();
    double tau = static_cast<double>(m) / std::max(rn, 1e-300);
    if (rn == 0.0) tau = 1.0;

    auto barrier_obj = [&](const VectorXd& xv, const VectorXd& tv, double tau_) {
        double logsum = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double u = tv(j) * tv(j) - xv(2 * j) * xv(2 * j) - xv(2 * j + 1) * xv(2 * j + 1);
            if (!(tv(j) > 0.0) || !(u > 0.0)) return std::numeric_limits<double>::infinity();
            logsum += std::log(u);
        }
        const VectorXd res = rt - er * xv;
        return tau_ * (res.squaredNorm() + beta * w.dot(tv)) - logsum;
    };

    SolverStatus st;
    VectorXd u(m), gx(2 * m), gt(m), htt(m), rx(2 * m), z(2 * m), dx(2 * m), dt(m);
    std::vector<Eigen::Matrix2d> binv(m);
    std::vector<Eigen::Vector2d> hxt(m);
    MatrixXd p(2 * nr, 2 * m), s(2 * nr, 2 * nr);
    int newton = 0;
    bool done = false;
    while (!done) {
        for (int inner = 0; inner < 50; ++inner) {
            if (newton >= max_newton) {
                done = true;
                break;
            }
            ++newton;
            const VectorXd res = rt - er * x;
            const VectorXd gdata = -2.0 * (er.transpose() * res);
            for (Eigen::Index j = 0; j < m; ++j) {
                const double a = x(2 * j), b = x(2 * j + 1), tj = t(j);
                const double uj = tj * tj - a * a - b * b;
                u(j) = uj;
                gx(2 * j) = tau * gdata(2 * j) + 2.0 * a / uj;
                gx(2 * j + 1) = tau * gdata(2 * j + 1) + 2.0 * b / uj;
                gt(j) = tau * beta * w(j) - 2.0 * tj / uj;
                // Hessian of -log(u): grad u grad u^T / u^2 + diag(2,2,-2)/u, grad u = (-2a,-2b,2t)
                const double u2 = uj * uj;
                Eigen::Matrix2d hxx;
                hxx << 4.0 * a * a / u2 + 2.0 / uj, 4.0 * a * b / u2, 4.0 * a * b / u2, 4.0 * b * b / u2 + 2.0 / uj;
                const Eigen::Vector2d hx(-4.0 * a * tj / u2, -4.0 * b * tj / u2);
                const double ht = 4.0 * tj * tj / u2 - 2.0 / uj;
                hxt[j] = hx;
                htt(j) = ht;
                const Eigen::Matrix2d bj = hxx - hx * hx.transpose() / ht;
                binv[j] = bj.inverse();
                const Eigen::Vector2d rj = -Eigen::Vector2d(gx(2 * j), gx(2 * j + 1)) + hx * (gt(j) / ht);
                rx.segment<2>(2 * j) = rj;
                z.segment<2>(2 * j) = binv[j] * rj;
                p.middleCols<2>(2 * j).noalias() = er.middleCols<2>(2 * j) * binv[j];
            }
            s.noalias() = p * er.transpose();
            s.diagonal().array() += 1.0 / (2.0 * tau);
            const Eigen::LLT<MatrixXd> llt(s);
            dx = z - p.transpose() * llt.solve(er * z);
            for (Eigen::Index j = 0; j < m; ++j) dt(j) = (-gt(j) - hxt[j].dot(dx.segment<2>(2 * j))) / htt(j);
            const double lam2 = -(gx.dot(dx) + gt.dot(dt));
            if (!(lam2 > 2e-10)) break;
            const double f0 = barrier_obj(x, t, tau);
            double step = 1.0;
            bool moved = false;
            while (step > 1e-12) {
                const VectorXd xn = x + step * dx;
                const VectorXd tn = t + step * dt;
                if (barrier_obj(xn, tn, tau) <= f0 - 0.25 * step * lam2) {
                    x = xn;
                    t = tn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (done) break;
        const double f = (rt - er * x).squaredNorm() + beta * w.dot(t);
        if (2.0 * static_cast<double>(m) / tau < tol * std::max(1.0, f)) {
            st.converged = true;
            break;
        }
        tau *= 20.0;
    }
    CVec out(m);
    for (Eigen::Index j = 0; j < m; ++j) out(j) = cd(x(2 * j), x(2 * j + 1));
    st.iterations = newton;
    st.objective = data_fit(e, r, out) + beta * (w.array() * out.array().abs()).sum();
    return {out, st};
}

// Min ||r - E vec H||^2 + beta ||vec H||_1. Exact duplicate columns are merged
// first (equal weights make the merged problem equivalent) and the merged
// coefficient is split evenly, which is the minimum-norm optimal split.
inline SolveResult solve_lasso(const Dictionary& dict, const CVec& r_bar, double beta, const Hyperparams& hp) {
    if (r_bar.size() != dict.columns.rows()) throw std::invalid_argument("solve_lasso: r has wrong length");
    if (!(beta > 0.0)) throw std::invalid_argument("solve_lasso: beta must be > 0");
    const int m = dict.grid_size();
    const int ncol = dict.column_count();
    SolveResult out;
    if (hp.lasso_solver == LassoSolver::Fista) {
        auto [x, st] = lasso_fista(dict.columns, r_bar, beta, Eigen::VectorXd::Ones(ncol), hp.lasso_max_iters,
                                   hp.inner_tol);
        out.estimate = GramEstimate(std::move(x), m);
        out.status = st;
        return out;
    }
    const auto& reps = dict.representatives;
    const int nu = static_cast<int>(reps.size());
    CMat eu(dict.columns.rows(), nu);
    for (int k = 0; k < nu; ++k) eu.col(k) = dict.columns.col(reps[k]);
    std::vector<int> count(nu, 0);
    for (int j = 0; j < ncol; ++j) ++count[dict.group_of[j]];
    auto [xu, st] = lasso_interior_point(eu, r_bar, beta, Eigen::VectorXd::Ones(nu), hp.lasso_max_iters,
                                         hp.inner_tol);
    CVec x(ncol);
    for (int j = 0; j < ncol; ++j) x(j) = xu(dict.group_of[j]) / static_cast<double>(count[dict.group_of[j]]);
    out.estimate = GramEstimate(std::move(x), m);
    out.status = st;
    out.status.objective = data_fit(dict.columns, r_bar, out.estimate.vectorized) +
                           beta * out.estimate.vectorized.cwiseAbs().sum();
    return out;
}

// ---- PSD-constrained weighted least squares ------------------------------------

inline double psd_quadratic_objective(const CMat& e, const CVec& r, double eta, const Eigen::VectorXd& wts,
                                      const CVec& x) {
    return data_fit(e, r, x) + eta * (wts.array() * x.array().abs2()).sum();
}

inline constexpr double kAdmmResidualTol = 1e-3;

// min ||r - E x||^2 + eta x^H diag(wts) x  s.t. mat(x) PSD
inline SolveResult solve_psd_quadratic(const Dictionary& dict, const CVec& r_bar, double eta,
                                       const Eigen::VectorXd& wts, const GramEstimate& init, const Hyperparams& hp) {
    const CMat& e = dict.columns;
    const int m = dict.grid_size();
    const Eigen::Index n = e.cols();
    if (wts.size() != n || init.vectorized.size() != n) throw std::invalid_argument("solve_psd_quadratic: size mismatch");
    if (eta < 0.0) throw std::invalid_argument("solve_psd_quadratic: eta must be >= 0");
    SolveResult out;
    SolverStatus& st = out.status;
    const CVec ehr2 = 2.0 * (e.adjoint() * r_bar);

    if (hp.psd_solver == PsdSolver::ProjectedGradient) {
        const double lip = 2.0 * (spectral_norm_sq(e) + eta * wts.maxCoeff());
        CVec x = psd_project_vec(init.vectorized, m);
        double f_old = psd_quadratic_objective(e, r_bar, eta, wts, x);
        for (int it = 1; it <= hp.fp_max_iters; ++it) {
            const CVec grad = 2.0 * (e.adjoint() * (e * x)) - ehr2 + 2.0 * eta * (wts.array() * x.array()).matrix();
            x = psd_project_vec(x - grad / lip, m);
            const double f = psd_quadratic_objective(e, r_bar, eta, wts, x);
            st.iterations = it;
            st.objective = f;
            if (std::abs(f_old - f) <= hp.inner_tol * std::max(std::abs(f_old), 1e-300)) {
                st.converged = true;
                break;
            }
            f_old = f;
        }
        out.estimate = GramEstimate(std::move(x), m);
        return out;
    }

    // ADMM on x = z, z PSD. x-update solves (2E^H E + D) x = v with D = 2 eta W + rho
    // through Woodbury: D^-1 v - D^-1 E^H (I/2 + E D^-1 E^H)^-1 E D^-1 v.
    std::vector<double> sorted(wts.data(), wts.data() + n);
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    double rho = std::max(2.0 * eta * sorted[n / 2], 1e-8);
    Eigen::VectorXd dinv;
    Eigen::LLT<CMat> kllt;
    auto factor = [&](double rho_) {
        dinv = (2.0 * eta * wts.array() + rho_).inverse().matrix();
        CMat k = e * dinv.asDiagonal() * e.adjoint();
        k.diagonal().array() += 0.5;
        kllt.compute(k);
    };
    auto solve = [&](const CVec& v) -> CVec {
        const CVec dv = (dinv.array() * v.array()).matrix();
        const CVec corr = e.adjoint() * kllt.solve(e * dv);
        return dv - (dinv.array() * corr.array()).matrix();
    };
    factor(rho);
    CVec zv = psd_project_vec(init.vectorized, m);
    CVec uv = CVec::Zero(n);
    CVec xv(n);
    double f_old = psd_quadratic_objective(e, r_bar, eta, wts, zv);
    for (int it = 1; it <= hp.fp_max_iters; ++it) {
        xv = solve(ehr2 + rho * (zv - uv));
        const CVec z_old = zv;
        zv = psd_project_vec(xv + uv, m);
        uv += xv - zv;
        const double rp = (xv - zv).norm();
        const double rd = rho * (zv - z_old).norm();
        st.iterations = it;
        // objective of the feasible iterate; the residual guard keeps a stalled
        // early phase from passing as converged
        const double f = psd_quadratic_objective(e, r_bar, eta, wts, zv);
        if (std::abs(f_old - f) <= hp.inner_tol * std::max(std::abs(f_old), 1e-300) &&
            rp <= kAdmmResidualTol * std::max(zv.norm(), 1e-12)) {
            st.converged = true;
            break;
        }
        f_old = f;
        if (it % 20 == 0) {
            if (rp > 10.0 * rd) {
                rho *= 2.0;
                uv /= 2.0;
                factor(rho);
            } else if (rd > 10.0 * rp) {
                rho /= 2.0;
                uv *= 2.0;
                factor(rho);
            }
        }
    }
    st.objective = psd_quadratic_objective(e, r_bar, eta, wts, zv);
    out.estimate = GramEstimate(std::move(zv), m);
    return out;
}

// ---- support extraction --------------------------------------------------------

// Grid point used as the delay/Doppler reference: smallest delay, Doppler nearest 0.
inline int anchor_point(const DelayDopplerGrid& grid) {
    int best = 0;
    for (int d = 1; d < grid.d_nu; ++d)
        if (std::abs(grid.doppler_values[d]) < std::abs(grid.doppler_values[best])) best = d;
    return grid.index(0, best);
}

// Off-diagonal row energy of |H| per grid point.
inline std::vector<double> row_scores(const CMat& mag) {
    const auto m = mag.rows();
    std::vector<double> s(m, 0.0);
    for (Eigen::Index g = 0; g < m; ++g) {
        double acc = 0.0;
        for (Eigen::Index gp = 0; gp < m; ++gp)
            if (gp != g) acc += std::norm(mag(g, gp));
        s[g] = std::sqrt(acc);
    }
    return s;
}

// The covariance only sees relative delay/Doppler between paths, so all
// couplings with the same (dl, dd) offset are pooled and placed on the anchor row.
inline CMat anchored_couplings(const CMat& mag, const DelayDopplerGrid& grid, int min_sep) {
    const int m = grid.size();
    const int d = grid.d_nu;
    std::map<std::pair<int, int>, double> cls;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            if (a == b) continue;
            int dl = b / d - a / d;
            int dd = b % d - a % d;
            if (dl < 0 || (dl == 0 && dd < 0)) {
                dl = -dl;
                dd = -dd;
            }
            cls[{dl, dd}] += std::abs(mag(a, b));
        }
    const int anc = anchor_point(grid);
    const int ak = anc / d, ad = anc % d;
    CMat out = CMat::Zero(m, m);
    for (const auto& [key, v] : cls) {
        const auto [dl, dd] = key;
        if (dl < std::max(min_sep, 0)) continue;
        if (dl == 0 && dd == 0) continue;
        const int k = ak + dl, di = ad + dd;
        if (k >= grid.k_tau || di < 0 || di >= d) continue;
        const int g = grid.index(k, di);
        out(anc, g) = v;
        out(g, anc) = v;
    }
    return out;
}

inline RpeResult extract_support_and_match(const GramEstimate& est, const DelayDopplerGrid& grid,
                                           const AfdmConfig& units, const Hyperparams& hp) {
    const double threshold = hp.support_threshold;
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("extract_support_and_match: threshold must lie in (0,1)");
    if (est.grid_size != grid.size()) throw std::invalid_argument("extract_support_and_match: grid size mismatch");
    RpeResult res;
    res.estimate = est;
    const CMat mag = est.matrix().cwiseAbs().cast<cd>();
    const CMat work = hp.support_rule == SupportRule::Anchored ? anchored_couplings(mag, grid, hp.min_delay_separation)
                                                               : mag;
    std::vector<double> score = row_scores(work);
    double smax = *std::max_element(score.begin(), score.end());
    if (!(smax > 0.0)) {
        // no coupling at all: a single path, located by the diagonal
        std::fill(score.begin(), score.end(), 0.0);
        int best = -1;
        double dmax = 0.0;
        for (int g = 0; g < grid.size(); ++g)
            if (std::abs(mag(g, g)) > dmax) {
                dmax = std::abs(mag(g, g));
                best = g;
            }
        if (best >= 0) score[best] = dmax;
        smax = dmax;
    }
    res.diagnostics.point_scores = score;
    if (!(smax > 0.0)) return res;

    std::vector<int> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] > score[b]; });
    std::vector<int> keep;
    for (int g : order) {
        if (!(score[g] > 0.0)) break;
        if (hp.top_k > 0) {
            if (static_cast<int>(keep.size()) >= hp.top_k) break;
        } else if (score[g] < threshold * smax) {
            break;
        }
        keep.push_back(g);
    }
    for (int g : keep) {
        const GridPoint p = grid.point(g);
        res.detections.push_back({g, p.delay_idx, p.doppler, score[g]});
        const double tau = p.delay_idx * units.sample_period_s();
        const double nu = p.doppler * units.sample_rate_hz / units.n_samples;
        res.tau_hat.push_back(tau);
        res.nu_hat.push_back(nu);
        res.range_hat.push_back(kSpeedOfLight * tau);
        res.velocity_hat.push_back(kSpeedOfLight * nu / units.carrier_hz);
    }
    return res;
}

// ---- full pipeline -------------------------------------------------------------

inline double fp_objective(const Dictionary& dict, const CVec& r, const CVec& x, const Hyperparams& hp) {
    return data_fit(dict.columns, r, x) + hp.eta * l0_approx(x, hp.alpha);
}

inline RpeResult run_blind_rpe(const CovarianceObservation& obs, const Dictionary& dict, const Hyperparams& hp,
                               const AfdmConfig& units) {
    hp.validate();
    if (obs.row_sum.size() != dict.columns.rows())
        throw std::invalid_argument("run_blind_rpe: observation length " + std::to_string(obs.row_sum.size()) +
                                    " does not match dictionary rows " + std::to_string(dict.columns.rows()));
    const int m = dict.grid_size();
    CVec r = obs.row_sum;
    double scale = 1.0;
    const double power = obs.modified_cov.trace().real() / static_cast<double>(obs.modified_cov.rows());
    if (!(power > 0.0) || !std::isfinite(power)) {
        RpeResult empty;
        empty.estimate = GramEstimate(CVec::Zero(static_cast<Eigen::Index>(m) * m), m);
        empty.diagnostics.point_scores.assign(m, 0.0);
        empty.diagnostics.scale = 0.0;
        return empty;
    }
    if (hp.scale_target > 0.0) {
        scale = hp.scale_target / power;
        r *= scale;
    }

    RpeDiagnostics diag;
    diag.scale = scale;
    SolveResult cur = solve_lasso(dict, r, hp.beta, hp);
    diag.lasso = cur.status;
    diag.converged = cur.status.converged;
    diag.objective_trace.push_back(fp_objective(dict, r, cur.estimate.vectorized, hp));
    for (int i = 0; i < hp.max_iters; ++i) {
        const Eigen::VectorXd w = fp_weight_matrix(cur.estimate, hp.alpha);
        cur = solve_psd_quadratic(dict, r, hp.eta, w, cur.estimate, hp);
        diag.fp.push_back(cur.status);
        diag.converged = diag.converged && cur.status.converged;
        diag.objective_trace.push_back(fp_objective(dict, r, cur.estimate.vectorized, hp));
    }
    RpeResult res = extract_support_and_match(cur.estimate, dict.grid, units, hp);
    diag.point_scores = res.diagnostics.point_scores;
    res.diagnostics = std::move(diag);
    return res;
}

inline RpeResult run_blind_rpe(const ReceivedFrames& rx, const Dictionary& dict, const Hyperparams& hp,
                               const AfdmConfig& units) {
    return run_blind_rpe(modified_sample_covariance(rx), dict, hp, units);
}

}  // namespace afdm_rpe

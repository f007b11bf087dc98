#include <catch2/catch_amalgamated.hpp>

#include "afdm_rpe/oracles.hpp"
#include "afdm_rpe/sparse_estimator.hpp"

using namespace afdm_rpe;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Tiny dictionary with arbitrary columns on a k x 1 grid.
Dictionary toy_dictionary(const CMat& cols, int k) {
    Dictionary d;
    d.grid = build_grid(k, 1, 0.1);
    d.n_samples = static_cast<int>(cols.rows());
    d.columns = cols;
    group_duplicate_columns(d);
    return d;
}

CMat random_unitary(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    CMat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = draw_gain(1.0, rng);
    return Eigen::HouseholderQR<CMat>(m).householderQ();
}

const Dictionary& paper_dictionary() {
    static const Dictionary d = build_dictionary(AfdmConfig{}, build_grid(5, 5, 0.1));
    return d;
}

}  // namespace

TEST_CASE("complex soft threshold") {
    CHECK(std::abs(complex_soft_threshold({3, 4}, 1.0) - cd(2.4, 3.2)) < 1e-15);
    CHECK(complex_soft_threshold({0.3, 0.4}, 0.5) == cd(0, 0));
    CHECK(complex_soft_threshold({0.3, 0.4}, 0.0) == cd(0.3, 0.4));
}

TEST_CASE("fractional programming auxiliary weights") {
    CVec b(2);
    b << cd(1, 0), cd(0, 0);
    const Eigen::VectorXd a = fp_auxiliary(b, 1e-3);
    CHECK_THAT(a(0), WithinAbs(0.0315912, 1e-7));
    CHECK_THAT(a(1), WithinAbs(31.6228, 1e-4));
    const Eigen::VectorXd w = fp_weight_matrix(GramEstimate(CVec::Ones(4), 2), 1e-3);
    CHECK_THAT(w(0), WithinRel(0.0315912 * 0.0315912, 1e-5));
    CHECK_THROWS_AS(fp_auxiliary(b, 0.0), std::invalid_argument);
}

TEST_CASE("smooth l0 and its surrogate agree at the anchor") {
    CVec one(1);
    one << cd(1, 0);
    CHECK_THAT(l0_approx(one, 1e-3), WithinAbs(0.999001, 1e-6));
    CHECK_THAT(surrogate_l0(one, fp_auxiliary(one, 1e-3), 1e-3), WithinAbs(0.999001, 1e-6));
    CHECK(max_fp_anchor_gap(200, 32, 3) < 1e-9);
    CHECK(fp_monotone_tightness(200, 16, 4));
}

TEST_CASE("surrogate majorizes away from the anchor") {
    std::mt19937_64 rng(12);
    for (int k = 0; k < 50; ++k) {
        CVec b(8), c(8);
        for (int i = 0; i < 8; ++i) {
            b(i) = draw_gain(1.0, rng);
            c(i) = draw_gain(1.0, rng);
        }
        const Eigen::VectorXd aux = fp_auxiliary(b, 1e-2);
        CHECK(surrogate_l0(c, aux, 1e-2) >= l0_approx(c, 1e-2) - 1e-12);
    }
}

TEST_CASE("PSD projection") {
    CMat m(2, 2);
    m << 1, 0, 0, -1;
    CMat want(2, 2);
    want << 1, 0, 0, 0;
    CHECK((psd_project(m) - want).norm() < 1e-14);
    CMat h(3, 3);
    h << 2, cd(0, 1), 0, cd(0, -1), 2, 0, 0, 0, 1;
    CHECK((psd_project(h) - h).norm() < 1e-12);
    CHECK_THROWS_AS(psd_project(CMat::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("LASSO with identity dictionary is a soft threshold") {
    std::mt19937_64 rng(7);
    CVec r(16);
    for (int i = 0; i < 16; ++i) r(i) = 2.0 * draw_gain(1.0, rng);
    const CMat e = CMat::Identity(16, 16);
    const double beta = 1.0;
    CVec want(16);
    for (int i = 0; i < 16; ++i) want(i) = complex_soft_threshold(r(i), beta / 2.0);
    const auto w = Eigen::VectorXd::Ones(16);
    const auto [xf, sf] = lasso_fista(e, r, beta, w, 500, 1e-12);
    CHECK((xf - want).norm() < 1e-6);
    const auto [xi, si] = lasso_interior_point(e, r, beta, w, 500, 1e-10);
    CHECK((xi - want).norm() < 1e-4);
    CHECK(si.converged);
}

TEST_CASE("LASSO solvers agree on the paper dictionary") {
    const Dictionary& d = paper_dictionary();
    AfdmConfig cfg;
    const PathSet ps = {make_grid_path(cfg, {0.8, 0.1}, 0, 0.0), make_grid_path(cfg, {-0.3, 0.5}, 1, 0.05)};
    CVec r = perfect_covariance(ps, cfg).row_sum;
    r *= 16.0 / (r.real().mean());
    Hyperparams hp;
    const SolveResult ip = solve_lasso(d, r, 1.0, hp);
    hp.lasso_solver = LassoSolver::Fista;
    hp.lasso_max_iters = 20000;
    hp.inner_tol = 1e-12;
    const SolveResult fi = solve_lasso(d, r, 1.0, hp);
    // FISTA is slow on this dictionary; the interior point objective must be no worse
    CHECK(ip.status.objective <= fi.status.objective * (1.0 + 1e-6));
    CHECK_THROWS_AS(solve_lasso(d, CVec::Zero(3), 1.0, hp), std::invalid_argument);
}

TEST_CASE("PSD solver, eta = 0, unitary dictionary, PSD optimum") {
    const CMat q = random_unitary(4, 3);
    const Dictionary d = toy_dictionary(q, 2);
    CMat h0(2, 2);
    h0 << 2.0, cd(0.5, -0.3), cd(0.5, 0.3), 1.0;
    const CVec r = q * GramEstimate::from_matrix(h0).vectorized;
    Hyperparams hp;
    for (PsdSolver s : {PsdSolver::Admm, PsdSolver::ProjectedGradient}) {
        hp.psd_solver = s;
        hp.fp_max_iters = 5000;
        hp.inner_tol = 1e-14;
        const SolveResult res =
            solve_psd_quadratic(d, r, 0.0, Eigen::VectorXd::Ones(4), GramEstimate(CVec::Zero(4), 2), hp);
        CHECK((res.estimate.vectorized - q.adjoint() * r).norm() < 1e-6);
    }
}

TEST_CASE("PSD solver, dominating eta drives the solution to zero") {
    const Dictionary& d = paper_dictionary();
    AfdmConfig cfg;
    const PathSet ps = {make_grid_path(cfg, {1, 0}, 0, 0.0), make_grid_path(cfg, {0.5, 0}, 2, -0.05)};
    const CVec r = perfect_covariance(ps, cfg).row_sum;
    Hyperparams hp;
    const SolveResult res = solve_psd_quadratic(d, r, 1e9, Eigen::VectorXd::Ones(625),
                                                GramEstimate(CVec::Zero(625), 25), hp);
    CHECK(res.estimate.vectorized.norm() < 1e-5 * r.norm());
}

TEST_CASE("PSD solver matches a grid search on the 2 x 2 cone") {
    AfdmConfig cfg;
    cfg.n_samples = 8;
    cfg.c1 = default_c1(8, 0.1);
    cfg.c2 = default_c2(8);
    const Dictionary d = build_dictionary(cfg, build_grid(2, 1, 0.1));
    const PathSet ps = {make_grid_path(cfg, {0.9, 0.2}, 0, 0.0), make_grid_path(cfg, {0.4, -0.3}, 1, 0.0)};
    const CVec r = perfect_covariance(ps, cfg).row_sum;
    const double eta = 0.1;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(4);
    Hyperparams hp;
    hp.fp_max_iters = 3000;
    hp.inner_tol = 1e-13;
    const SolveResult res = solve_psd_quadratic(d, r, eta, w, GramEstimate(CVec::Zero(4), 2), hp);
    const double got = psd_quadratic_objective(d.columns, r, eta, w, res.estimate.vectorized);

    // H = [a, b; conj(b), c], a, c >= 0, |b|^2 <= a c; zooming grid search
    auto obj = [&](double a, double c, double br, double bi) {
        if (a < 0 || c < 0 || br * br + bi * bi > a * c) return std::numeric_limits<double>::infinity();
        CVec x(4);
        x << a, cd(br, bi), cd(br, -bi), c;
        return psd_quadratic_objective(d.columns, r, eta, w, x);
    };
    double c0[4] = {1, 1, 0, 0}, span = 2.0, best = obj(1, 1, 0, 0);
    for (int round = 0; round < 60; ++round) {
        double nb[4] = {c0[0], c0[1], c0[2], c0[3]};
        for (int i = -5; i <= 5; ++i)
            for (int j = -5; j <= 5; ++j)
                for (int k = -5; k <= 5; ++k)
                    for (int l = -5; l <= 5; ++l) {
                        const double p[4] = {c0[0] + span * i / 5, c0[1] + span * j / 5, c0[2] + span * k / 5,
                                             c0[3] + span * l / 5};
                        const double v = obj(p[0], p[1], p[2], p[3]);
                        if (v < best) {
                            best = v;
                            std::copy(p, p + 4, nb);
                        }
                    }
        std::copy(nb, nb + 4, c0);
        span *= 0.7;
    }
    CHECK_THAT(got, WithinAbs(best, 1e-4));
    CHECK(got <= best + 1e-4);
}

TEST_CASE("PSD solver input checks") {
    const Dictionary d = toy_dictionary(CMat::Identity(4, 4), 2);
    Hyperparams hp;
    CHECK_THROWS_AS(solve_psd_quadratic(d, CVec::Ones(4), -1.0, Eigen::VectorXd::Ones(4),
                                        GramEstimate(CVec::Zero(4), 2), hp),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_psd_quadratic(d, CVec::Ones(4), 0.1, Eigen::VectorXd::Ones(3),
                                        GramEstimate(CVec::Zero(4), 2), hp),
                    std::invalid_argument);
}

TEST_CASE("extraction: rank-one estimate from a 1-sparse vector") {
    const DelayDopplerGrid grid = build_grid(5, 5, 0.1);
    CVec h = CVec::Zero(25);
    h(17) = cd(0.7, -0.2);
    const RpeResult res = extract_support_and_match(GramEstimate::from_matrix(h * h.adjoint()), grid, AfdmConfig{},
                                                    Hyperparams{});
    REQUIRE(res.detections.size() == 1);
    CHECK(res.detections[0].grid_index == 17);
    CHECK(res.detections[0].delay_idx == 3);
    CHECK_THAT(res.detections[0].doppler_norm, WithinAbs(0.0, 1e-15));
    CHECK_THAT(res.range_hat[0], WithinAbs(3 * kSpeedOfLight / 20e6, 1e-9));
}

TEST_CASE("extraction: zero estimate gives no detections") {
    const DelayDopplerGrid grid = build_grid(5, 5, 0.1);
    const RpeResult res = extract_support_and_match(GramEstimate(CVec::Zero(625), 25), grid, AfdmConfig{}, Hyperparams{});
    CHECK(res.detections.empty());
    CHECK(res.range_hat.empty());
}

TEST_CASE("extraction: argument checks") {
    const DelayDopplerGrid grid = build_grid(5, 5, 0.1);
    Hyperparams hp;
    hp.support_threshold = 1.0;
    CHECK_THROWS_AS(extract_support_and_match(GramEstimate(CVec::Zero(625), 25), grid, AfdmConfig{}, hp),
                    std::invalid_argument);
    CHECK_THROWS_AS(extract_support_and_match(GramEstimate(CVec::Zero(16), 4), grid, AfdmConfig{}, Hyperparams{}),
                    std::invalid_argument);
}

TEST_CASE("extraction: pooled couplings land on the anchor row") {
    const DelayDopplerGrid grid = build_grid(5, 5, 0.1);
    // coupling between (2, -0.05) and (3, 0.0): offset (1, +1)
    CMat h = CMat::Zero(25, 25);
    h(grid.index(2, 1), grid.index(2, 1)) = 1.0;
    h(grid.index(3, 2), grid.index(3, 2)) = 1.0;
    h(grid.index(2, 1), grid.index(3, 2)) = 0.5;
    h(grid.index(3, 2), grid.index(2, 1)) = 0.5;
    const RpeResult res = extract_support_and_match(GramEstimate::from_matrix(h), grid, AfdmConfig{}, Hyperparams{});
    REQUIRE(res.detections.size() == 2);
    CHECK(res.detections[0].grid_index == anchor_point(grid));
    CHECK(res.detections[1].delay_idx == 1);
    CHECK_THAT(res.detections[1].doppler_norm, WithinAbs(0.05, 1e-12));
}

TEST_CASE("end to end, perfect covariance, LoS plus on-grid target") {
    const Dictionary& d = paper_dictionary();
    AfdmConfig cfg;
    const PathSet ps = {make_grid_path(cfg, {0.9, -0.4}, 0, 0.0), make_grid_path(cfg, {0.3, 0.6}, 1, 0.05)};
    const RpeResult res = run_blind_rpe(perfect_covariance(ps, cfg), d, Hyperparams{}, cfg);
    REQUIRE(res.detections.size() == 2);
    std::set<int> got{res.detections[0].grid_index, res.detections[1].grid_index};
    CHECK(got == std::set<int>{d.grid.index(0, 2), d.grid.index(1, 3)});
    // the target maps back to the 15 m / 37 m/s scenario within one grid bin
    const double bin_v = kSpeedOfLight * 0.05 * 20e6 / 64 / 70e9;
    bool ok = false;
    for (std::size_t k = 0; k < res.detections.size(); ++k)
        if (res.detections[k].delay_idx == 1)
            ok = std::abs(res.range_hat[k] - 15.0) <= kSpeedOfLight / 20e6 && std::abs(res.velocity_hat[k] - 37.0) <= bin_v;
    CHECK(ok);

    CHECK(res.diagnostics.objective_trace.size() == 4);
    // FP passes never increase the objective beyond the inner tolerance
    const auto& tr = res.diagnostics.objective_trace;
    for (std::size_t i = 2; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1] * (1.0 + 1e-6) + 1e-9);
    Eigen::SelfAdjointEigenSolver<CMat> es(res.estimate.matrix());
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("end to end, zero signal gives no detections") {
    const Dictionary& d = paper_dictionary();
    ReceivedFrames rx;
    rx.rx_daft = CMat::Zero(64, 10);
    rx.noise_power = 0.0;
    const RpeResult res = run_blind_rpe(rx, d, Hyperparams{}, AfdmConfig{});
    CHECK(res.detections.empty());
}

TEST_CASE("end to end rejects mismatched observation length") {
    const Dictionary& d = paper_dictionary();
    ReceivedFrames rx;
    rx.rx_daft = CMat::Ones(32, 4);
    CHECK_THROWS_AS(run_blind_rpe(rx, d, Hyperparams{}, AfdmConfig{}), std::invalid_argument);
}

TEST_CASE("noisy frames: objective trace and PSD feasibility") {
    const Dictionary& d = paper_dictionary();
    AfdmConfig cfg;
    std::mt19937_64 rng(99);
    const PathSet ps = scene_to_paths(Scene{}, cfg, ChannelLimits{}, rng);
    const CMat x = draw_qam_block(64, 500, 4, rng);
    const FrameBatch b = propagate_frames(build_effective_channel(cfg, ps), x, 0.02, rng);
    const RpeResult res = run_blind_rpe(b.rx, d, Hyperparams{}, cfg);
    const auto& tr = res.diagnostics.objective_trace;
    REQUIRE(tr.size() == 4);
    for (double v : tr) CHECK(std::isfinite(v));
    Eigen::SelfAdjointEigenSolver<CMat> es(res.estimate.matrix());
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    CHECK_FALSE(res.detections.empty());
}

TEST_CASE("small exact recovery run") {
    const RecoveryStats st = exact_recovery_run(AfdmConfig{}, paper_dictionary(), Hyperparams{}, 10, 77);
    CHECK(st.exact == 10);
}

TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    CHECK_NOTHROW(hp.validate());
    hp.beta = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.support_threshold = 0.0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
    hp = Hyperparams{};
    hp.fp_max_iters = 0;
    CHECK_THROWS_AS(hp.validate(), std::invalid_argument);
}

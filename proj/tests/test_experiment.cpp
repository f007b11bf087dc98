#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "afdm_rpe/experiment.hpp"

using namespace afdm_rpe;
using Catch::Matchers::WithinAbs;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.snr_db_list = {20.0};
    cfg.frame_counts = {50, kPerfectFrames};
    cfg.trials = 2;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("noise power from SNR") {
    CHECK_THAT(snr_to_noise_power(1.0, 1, 1.0), WithinAbs(2.0, 1e-15));
    CHECK_THAT(snr_to_noise_power(20.0, 1, 1.0), WithinAbs(0.1, 1e-15));
    CHECK_THAT(snr_to_noise_power(db_to_linear(10.0), 2, 0.5), WithinAbs(0.15, 1e-15));
    CHECK_THROWS_AS(snr_to_noise_power(0.0, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(snr_to_noise_power(1.0, -1, 1.0), std::invalid_argument);
    CHECK_THAT(db_to_linear(10.0), WithinAbs(10.0, 1e-12));
    CHECK_THAT(db_to_linear(-3.0), WithinAbs(0.501187, 1e-6));
}

TEST_CASE("RMSE") {
    CHECK_THAT(rmse_metric({5.0, 0.0}, {0.0, 0.0}), WithinAbs(3.5355, 1e-4));
    CHECK_THAT(rmse_metric({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), WithinAbs(0.0, 1e-15));
    CHECK_THROWS_AS(rmse_metric({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(rmse_metric({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("trial seeds are distinct and stable") {
    CHECK(trial_seed(1, 0, 0) == trial_seed(1, 0, 0));
    CHECK(trial_seed(1, 0, 0) != trial_seed(1, 0, 1));
    CHECK(trial_seed(1, 0, 0) != trial_seed(1, 1, 0));
    CHECK(trial_seed(1, 0, 0) != trial_seed(2, 0, 0));
}

TEST_CASE("association takes the nearest free truth, strongest detection first") {
    const std::vector<TruthPoint> truths = {{0.25, 0.0}, {1.0, 0.0276}};
    std::vector<Detection> dets = {{2, 0, 0.0, 5.0}, {8, 1, 0.05, 2.0}};
    auto owner = associate(dets, truths, 0.05);
    CHECK(owner == std::vector<int>{0, 1});
    // a single detection near the target leaves the LoS unmatched
    owner = associate({{8, 1, 0.05, 2.0}}, truths, 0.05);
    CHECK(owner == std::vector<int>{-1, 0});
    owner = associate({}, truths, 0.05);
    CHECK(owner == std::vector<int>{-1, -1});
}

TEST_CASE("perfect-covariance trial recovers the scene within one bin") {
    const ExperimentContext ctx = make_context(tiny_config());
    const TrialOutcome o = run_trial(ctx, 0.0, kPerfectFrames, 11);
    CHECK(o.targets == 1);
    REQUIRE(o.matched == 1);
    CHECK(std::sqrt(o.range_sq_err[0]) <= kSpeedOfLight / 20e6);
    CHECK(std::sqrt(o.velocity_sq_err[0]) <= kSpeedOfLight * 0.05 * 20e6 / 64 / 70e9);
}

TEST_CASE("experiment runs are deterministic and well formed") {
    const ExperimentContext ctx = make_context(tiny_config());
    int calls = 0;
    const auto a = run_experiment(ctx, [&](const RmseRecord&) { ++calls; });
    const auto b = run_experiment(ctx);
    CHECK(calls == 2);
    REQUIRE(a.size() == 2);
    CHECK(format_csv(a) == format_csv(b));
    CHECK(a[0].frames == 50);
    CHECK(a[1].frames == kPerfectFrames);
    CHECK(a[0].trials == 2);
    const std::string csv = format_csv(a);
    CHECK(csv.rfind("snr_db,frames,range_rmse_m,velocity_rmse_mps,detection_rate,trials\n", 0) == 0);
    CHECK(csv.find(",perfect,") != std::string::npos);
}

TEST_CASE("CSV formatting") {
    RmseRecord r;
    r.snr_db = 10;
    r.frames = 200;
    r.range_rmse_m = std::numeric_limits<double>::quiet_NaN();
    r.velocity_rmse_mps = 1.5;
    r.detection_rate = 0.0;
    r.trials = 3;
    CHECK(format_csv({r}) ==
          "snr_db,frames,range_rmse_m,velocity_rmse_mps,detection_rate,trials\n"
          "10.000000,200,nan,1.500000,0.000000,3\n");
    CHECK(frames_token(kPerfectFrames) == "perfect");
}

TEST_CASE("plot files, one per frame count") {
    const auto dir = std::filesystem::temp_directory_path() / "afdm_rpe_plot_test";
    std::filesystem::remove_all(dir);
    RmseRecord a{10, 200, 1, 2, 1, 5, 0}, b{20, 200, 0.5, 1, 1, 5, 0}, c{10, kPerfectFrames, 0, 0, 1, 5, 0};
    const auto files = write_plot_data({a, b, c}, dir.string());
    REQUIRE(files.size() == 2);
    CHECK(std::filesystem::path(files[0]).filename() == "rmse_T200.dat");
    CHECK(std::filesystem::path(files[1]).filename() == "rmse_Tperfect.dat");
    std::ifstream is(files[0]);
    std::string header, l1, l2, extra;
    std::getline(is, header);
    std::getline(is, l1);
    std::getline(is, l2);
    CHECK(header[0] == '#');
    CHECK(l1 == "10.000000 1.000000 2.000000 1.000000");
    CHECK(l2 == "20.000000 0.500000 1.000000 1.000000");
    CHECK_FALSE(std::getline(is, extra));
    std::filesystem::remove_all(dir);
}

TEST_CASE("experiment config validation") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig{};
    cfg.snr_db_list.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ExperimentConfig{};
    cfg.frame_counts = {-5};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK(ExperimentConfig{}.limits().max_delay_idx == 4);
}

TEST_CASE("writing to an unwritable path fails loudly") {
    CHECK_THROWS_AS(write_text("/nonexistent_dir_xyz/out.csv", "x"), std::runtime_error);
}

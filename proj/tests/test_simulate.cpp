#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vaxpulse/simulate.hpp"

using namespace vaxpulse;
using namespace vaxpulse::sim;

TEST_SUITE_BEGIN("simulate");

TEST_CASE("same config and seed give byte-identical outputs") {
    auto cfg = ScenarioConfig::paper_shaped(42);
    cfg.days = 50;
    auto [s1, l1] = simulate_series(cfg);
    auto [s2, l2] = simulate_series(cfg);
    std::ostringstream a, b;
    polarity::write_series_csv(a, s1);
    polarity::write_series_csv(b, s2);
    CHECK(a.str() == b.str());
    CHECK(l1.to_json() == l2.to_json());

    std::ostringstream pa, la, pb, lb;
    simulate_posts(cfg, pa, la);
    simulate_posts(cfg, pb, lb);
    CHECK(pa.str() == pb.str());
    CHECK(la.str() == lb.str());

    cfg.seed = 43;
    auto [s3, l3] = simulate_series(cfg);
    std::ostringstream c;
    polarity::write_series_csv(c, s3);
    CHECK(a.str() != c.str());
}

TEST_CASE("days = 0 gives an empty series") {
    ScenarioConfig cfg;
    cfg.days = 0;
    auto [series, ledger] = simulate_series(cfg);
    CHECK(series.days.empty());
    CHECK(ledger.days.empty());
}

TEST_CASE("law of large numbers: proportions converge to the trajectory") {
    ScenarioConfig cfg;
    cfg.days = 1;
    cfg.seed = 11;
    cfg.volume.base_rate = 100000;
    cfg.volume.overdispersion = 0.0;
    cfg.trajectory.p_const = {0.6, 0.3, 0.1};
    auto [series, ledger] = simulate_series(cfg);
    REQUIRE(series.days.size() == 1);
    const auto& d = series.days[0];
    CHECK(d.pF() == doctest::Approx(0.6).epsilon(0.01));
    CHECK(d.pC() == doctest::Approx(0.3).epsilon(0.02));
    CHECK(d.pU() == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("empirical proportions shrink towards truth at the 1/sqrt(n) rate") {
    // three volume scales; mean |pF - p| should fall roughly as 1/sqrt(n)
    std::array<double, 3> rates = {100, 1600, 25600};
    std::array<double, 3> mean_abs{};
    for (int k = 0; k < 3; ++k) {
        ScenarioConfig cfg;
        cfg.days = 200;
        cfg.seed = 17 + k;
        cfg.volume.base_rate = rates[k];
        cfg.volume.overdispersion = 0.0;
        cfg.trajectory.p_const = {0.7, 0.2, 0.1};
        auto [series, ledger] = simulate_series(cfg);
        double acc = 0;
        int used = 0;
        for (const auto& d : series.days) {
            if (d.n() == 0) continue;
            acc += std::abs(d.pF() - 0.7);
            ++used;
        }
        mean_abs[k] = acc / used;
    }
    // each 16x volume step should shrink the error by roughly 4x
    CHECK(mean_abs[1] < mean_abs[0] * 0.4);
    CHECK(mean_abs[2] < mean_abs[1] * 0.4);
}

TEST_CASE("planted spike multiplies the day volume") {
    ScenarioConfig cfg;
    cfg.days = 200;
    cfg.seed = 23;
    cfg.volume.base_rate = 400;
    cfg.volume.overdispersion = 0.01;
    cfg.volume.spikes = {{100, 20.0}};
    auto [series, ledger] = simulate_series(cfg);

    std::vector<double> n_others;
    for (int i = 0; i < 200; ++i)
        if (i != 100) n_others.push_back(static_cast<double>(series.days[i].n()));
    std::nth_element(n_others.begin(), n_others.begin() + n_others.size() / 2, n_others.end());
    const double median = n_others[n_others.size() / 2];
    const double ratio = static_cast<double>(series.days[100].n()) / median;
    CHECK(ratio > 14.0);
    CHECK(ratio < 28.0);
    CHECK(ledger.days[100].spike);
}

TEST_CASE("change-point trajectory switches exactly at the planted day") {
    ScenarioConfig cfg;
    cfg.trajectory.kind = PolarityTrajectory::Kind::ChangePoint;
    cfg.trajectory.change_day = 5;
    cfg.trajectory.p_before = {0.8, 0.1, 0.1};
    cfg.trajectory.p_after = {0.2, 0.4, 0.4};
    CHECK(cfg.trajectory.at(4, 10)[0] == doctest::Approx(0.8));
    CHECK(cfg.trajectory.at(5, 10)[0] == doctest::Approx(0.2));
}

TEST_CASE("parabolic trajectory hits its planted peak and end values") {
    ScenarioConfig cfg = ScenarioConfig::paper_shaped(1);
    const auto peak = cfg.trajectory.at(140, 365);
    const auto end = cfg.trajectory.at(364, 365);
    CHECK(peak[0] == doctest::Approx(0.76).epsilon(1e-12));
    CHECK(end[0] == doctest::Approx(0.69).epsilon(1e-12));
    for (int d = 0; d < 365; ++d) {
        const auto p = cfg.trajectory.at(d, 365);
        CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p[0] <= 0.76 + 1e-12);
        CHECK(p[0] >= 0.01);
    }
}

TEST_CASE("all-OOC posts aggregate to an all-zero series") {
    ScenarioConfig cfg;
    cfg.days = 10;
    cfg.seed = 3;
    cfg.volume.base_rate = 30;
    cfg.p_ooc = 1.0;
    std::ostringstream posts, labels;
    auto ledger = simulate_posts(cfg, posts, labels);
    std::istringstream posts_in(posts.str());
    auto corpus = ingest::ingest_jsonl_stream(posts_in, {});
    std::unordered_map<std::string, classify::PolarityLabel> pred;
    for (const auto& [id, label] : ledger.post_labels) pred[id] = label;
    auto series = polarity::aggregate(corpus, pred);
    CHECK(series.total_posts() == 0);
}

TEST_CASE("scenario json round trip") {
    auto cfg = ScenarioConfig::paper_shaped(7);
    auto back = ScenarioConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());

    ScenarioConfig cp;
    cp.trajectory.kind = PolarityTrajectory::Kind::ChangePoint;
    cp.trajectory.change_day = 180;
    cp.trajectory.p_before = {0.7, 0.2, 0.1};
    cp.trajectory.p_after = {0.5, 0.3, 0.2};
    CHECK(ScenarioConfig::from_json(cp.to_json()).to_json() == cp.to_json());
}

TEST_CASE("calibrate_type1: degenerate null never flags") {
    ScenarioConfig cfg;
    cfg.days = 40;
    cfg.seed = 9;
    cfg.volume.base_rate = 50;
    cfg.trajectory.p_const = {1.0, 0.0, 0.0};
    auto result = calibrate_type1(TestKind::Basic, cfg, 5, {1500, 10000, 0}, 15, 1);
    for (const auto& lv : result.levels) CHECK(lv.mean_fraction == doctest::Approx(0.0));
}

TEST_CASE("calibrate_type1: flag fractions are monotone in alpha") {
    ScenarioConfig cfg;
    cfg.days = 120;
    cfg.seed = 9;
    cfg.volume.base_rate = 150;
    cfg.trajectory.p_const = {0.7, 0.165, 0.135};
    auto result = calibrate_type1(TestKind::Basic, cfg, 20, {1500, 10000, 0}, 15, 2);
    CHECK(result.levels[0].mean_fraction >= result.levels[1].mean_fraction);
    CHECK(result.levels[1].mean_fraction >= result.levels[2].mean_fraction);
    // parallel and serial execution agree exactly
    auto serial = calibrate_type1(TestKind::Basic, cfg, 20, {1500, 10000, 0}, 15, 1);
    for (int a = 0; a < 3; ++a)
        CHECK(result.levels[a].mean_fraction == serial.levels[a].mean_fraction);
    CHECK_THROWS_AS(calibrate_type1(TestKind::Basic, ScenarioConfig::paper_shaped(1), 2),
                    ContractViolation);
}

TEST_CASE("power study: zero effect reduces to type-I level") {
    ScenarioConfig cfg;
    cfg.days = 240;
    cfg.seed = 40;
    cfg.volume.base_rate = 300;
    cfg.trajectory.kind = PolarityTrajectory::Kind::ChangePoint;
    cfg.trajectory.change_day = 180;
    cfg.trajectory.p_before = {0.7, 0.165, 0.135};
    cfg.trajectory.p_after = {0.7, 0.165, 0.135};
    auto result = power_study(TestKind::Running, cfg, 20, 15, {1500, 10000, 0}, 15, 2);
    CHECK(result.levels[1].detection_fraction < 0.15);
}

TEST_CASE("power study: detection and localization grow with the effect size") {
    std::array<double, 3> deltas = {0.05, 0.10, 0.15};
    std::array<double, 3> detection{}, localization{};
    for (int k = 0; k < 3; ++k) {
        ScenarioConfig cfg;
        cfg.days = 240;
        cfg.seed = 41;
        cfg.volume.base_rate = 400;
        cfg.trajectory.kind = PolarityTrajectory::Kind::ChangePoint;
        cfg.trajectory.change_day = 180;
        cfg.trajectory.p_before = {0.70, 0.165, 0.135};
        const double pf = 0.70 - deltas[k];
        const double rest = 1 - pf;
        cfg.trajectory.p_after = {pf, rest * 0.55, rest * 0.45};
        auto result = power_study(TestKind::Running, cfg, 12, 15, {1500, 10000, 0}, 15, 2);
        detection[k] = result.levels[1].detection_fraction;
        localization[k] = result.levels[1].localization;
        if (k == 2) CHECK(result.levels[1].detection_probability > 0.9);
    }
    CHECK(detection[0] < detection[1]);
    CHECK(detection[1] <= detection[2]);
    CHECK(detection[2] > 0.5);
    CHECK(localization[0] < localization[1]);
    CHECK(localization[1] <= localization[2]);
}

TEST_SUITE_END();

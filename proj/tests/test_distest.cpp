#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vaxpulse/distest.hpp"
#include "vaxpulse/simulate.hpp"

using namespace vaxpulse;
using namespace vaxpulse::distest;

namespace {

// enumeration oracle, independent route: probabilities via long double
// factorial products, same tie tolerance as the implementation
long double pmf_oracle(std::int64_t a, std::int64_t b, std::int64_t c,
                       const std::array<double, 3>& p) {
    const std::int64_t n = a + b + c;
    long double coeff = 1.0L;
    std::int64_t placed = 0;
    for (std::int64_t k : {a, b, c}) {
        for (std::int64_t i = 1; i <= k; ++i) {
            coeff *= static_cast<long double>(placed + i);
            coeff /= static_cast<long double>(i);
        }
        placed += k;
    }
    (void)n;
    long double prob = coeff;
    const std::array<std::int64_t, 3> ks = {a, b, c};
    for (int j = 0; j < 3; ++j) {
        for (std::int64_t i = 0; i < ks[j]; ++i) prob *= static_cast<long double>(p[j]);
    }
    return prob;
}

double exact_oracle(const std::array<std::int64_t, 3>& counts, const std::array<double, 3>& p) {
    const std::int64_t n = counts[0] + counts[1] + counts[2];
    const long double p_obs = pmf_oracle(counts[0], counts[1], counts[2], p);
    const long double threshold = p_obs * (1.0L + 1e-7L);
    long double sum = 0;
    for (std::int64_t a = 0; a <= n; ++a)
        for (std::int64_t b = 0; b <= n - a; ++b) {
            const long double q = pmf_oracle(a, b, n - a - b, p);
            if (q <= threshold) sum += q;
        }
    if (p_obs == 0) return 0;
    return static_cast<double>(std::min(sum, 1.0L));
}

polarity::PolaritySeries constant_series(int days, std::array<std::int64_t, 3> counts) {
    polarity::PolaritySeries s;
    for (int i = 0; i < days; ++i) {
        polarity::DailyPolarity d;
        d.date = Date::from_ymd(2018, 1, 1) + i;
        d.nF = counts[0];
        d.nC = counts[1];
        d.nU = counts[2];
        s.days.push_back(d);
    }
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("distest");

TEST_CASE("exact test: modal outcome has p = 1") {
    // mode of Multinomial(10, (.5,.3,.2)) is (5,3,2)
    CHECK(exact_multinomial_pvalue({5, 3, 2}, {0.5, 0.3, 0.2}) == doctest::Approx(1.0));
}

TEST_CASE("exact test: degenerate null") {
    CHECK(exact_multinomial_pvalue({3, 0, 0}, {1.0, 0.0, 0.0}) == doctest::Approx(1.0));
    // observed mass on a zero-probability category: impossible outcome, p = 0
    CHECK(exact_multinomial_pvalue({2, 1, 0}, {1.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("exact test matches the enumeration oracle on the worked example") {
    const std::array<std::int64_t, 3> counts = {5, 3, 2};
    const std::array<double, 3> p0 = {0.5, 0.3, 0.2};
    // not the observed-mode case: shift the observation
    const std::array<std::int64_t, 3> shifted = {8, 1, 1};
    CHECK(exact_multinomial_pvalue(counts, p0) ==
          doctest::Approx(exact_oracle(counts, p0)).epsilon(1e-12));
    CHECK(exact_multinomial_pvalue(shifted, p0) ==
          doctest::Approx(exact_oracle(shifted, p0)).epsilon(1e-12));
}

TEST_CASE("exact test matches the oracle across random instances") {
    std::mt19937_64 rng(314);
    std::uniform_int_distribution<std::int64_t> n_dist(1, 50);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        std::array<double, 3> p = {u(rng), u(rng), u(rng)};
        const double sum = p[0] + p[1] + p[2];
        for (auto& v : p) v /= sum;
        const std::int64_t n = n_dist(rng);
        std::array<std::int64_t, 3> counts{};
        for (std::int64_t i = 0; i < n; ++i) {
            const double r = u(rng);
            if (r < p[0]) ++counts[0];
            else if (r < p[0] + p[1]) ++counts[1];
            else ++counts[2];
        }
        const double mine = exact_multinomial_pvalue(counts, p);
        const double oracle = exact_oracle(counts, p);
        CHECK(std::abs(mine - oracle) <= 1e-12);
        CHECK(mine > 0);
        CHECK(mine <= 1.0);
    }
}

TEST_CASE("exact test refuses n beyond the enumeration bound") {
    std::array<std::int64_t, 3> counts = {150, 40, 30};
    CHECK_THROWS_AS(exact_multinomial_pvalue(counts, {0.7, 0.2, 0.1}, 200), RequiresMonteCarlo);
    CHECK_NOTHROW(exact_multinomial_pvalue(counts, {0.7, 0.2, 0.1}, 500));
}

TEST_CASE("monte carlo is deterministic and add-one corrected") {
    const std::array<std::int64_t, 3> counts = {9, 1, 0};
    const std::array<double, 3> p0 = {0.5, 0.3, 0.2};
    const double a = mc_multinomial_pvalue(counts, p0, 10000, 99);
    const double b = mc_multinomial_pvalue(counts, p0, 10000, 99);
    CHECK(a == b);
    CHECK(a > 0);
    CHECK(mc_multinomial_pvalue({5, 3, 2}, p0, 10000, 1) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_THROWS_AS(mc_multinomial_pvalue(counts, p0, 100, 1), ContractViolation);
}

TEST_CASE("monte carlo agrees with exact within 3 standard errors") {
    std::mt19937_64 rng(2718);
    std::uniform_int_distribution<std::int64_t> n_dist(5, 50);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    int outside = 0;
    const int trials = 25;
    for (int trial = 0; trial < trials; ++trial) {
        std::array<double, 3> p = {u(rng), u(rng), u(rng)};
        const double sum = p[0] + p[1] + p[2];
        for (auto& v : p) v /= sum;
        const std::int64_t n = n_dist(rng);
        std::array<std::int64_t, 3> counts = {n, 0, 0};
        const double exact = exact_multinomial_pvalue(counts, p);
        const std::size_t reps = 20000;
        const double mc = mc_multinomial_pvalue(counts, p, reps, derive_seed(10, trial));
        const double se = std::sqrt(std::max(exact * (1 - exact), 1e-12) / reps);
        if (std::abs(mc - exact) > 3 * se + 2.0 / reps) ++outside;
    }
    CHECK(outside <= 1);
}

TEST_CASE("basic test: single-day modal series never flags") {
    auto series = constant_series(1, {5, 3, 2});
    polarity::YearlySummary summary;
    summary.pooled = {0.5, 0.3, 0.2};
    auto run = basic_test(series, summary);
    REQUIRE(run.outcomes.size() == 1);
    CHECK(run.outcomes[0].p_value == doctest::Approx(1.0));
    CHECK(run.summary.significant[0] == 0);
    CHECK(run.summary.significant[1] == 0);
    CHECK(run.summary.significant[2] == 0);
}

TEST_CASE("basic test auto-selects method by n") {
    auto series = constant_series(3, {150, 40, 30});  // n = 220 > default bound
    auto summary = polarity::pooled_summary(series);
    MultinomialTestConfig cfg;
    cfg.mc_reps = 10000;
    auto run = basic_test(series, summary, cfg);
    for (const auto& o : run.outcomes) CHECK(o.method == Method::MonteCarlo);
    cfg.exact_bound = 500;
    auto run2 = basic_test(series, summary, cfg);
    for (const auto& o : run2.outcomes) CHECK(o.method == Method::Exact);
}

TEST_CASE("flags are monotone in alpha and consistent with p-values") {
    sim::ScenarioConfig cfg;
    cfg.days = 80;
    cfg.seed = 4;
    cfg.volume.base_rate = 120;
    auto [series, ledger] = sim::simulate_series(cfg);
    auto run = basic_test(series, polarity::pooled_summary(series), {500, 10000, 1});
    for (const auto& o : run.outcomes) {
        CHECK(o.significant(0.01) <= o.significant(0.05));
        CHECK(o.significant(0.05) <= o.significant(0.10));
        CHECK(o.significant(0.05) == (o.p_value <= 0.05));
    }
    CHECK(run.summary.significant[2] <= run.summary.significant[1]);
    CHECK(run.summary.significant[1] <= run.summary.significant[0]);
    CHECK(run.summary.tested == series.nonzero_days());
}

TEST_CASE("p-values invariant under category permutation") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::int64_t> c_dist(0, 30);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<std::int64_t, 3> counts = {c_dist(rng), c_dist(rng), c_dist(rng)};
        if (counts[0] + counts[1] + counts[2] == 0) counts[0] = 1;
        std::array<double, 3> p = {u(rng), u(rng), u(rng)};
        const double sum = p[0] + p[1] + p[2];
        for (auto& v : p) v /= sum;
        const double base = exact_multinomial_pvalue(counts, p);
        const double swapped =
            exact_multinomial_pvalue({counts[2], counts[0], counts[1]}, {p[2], p[0], p[1]});
        CHECK(base == doctest::Approx(swapped).epsilon(1e-12));
    }
}

TEST_CASE("running test: constant series never flags") {
    auto series = constant_series(60, {70, 20, 10});
    auto run = running_test(series, 15);
    CHECK(run.summary.tested == 45);  // first window days are skipped
    CHECK(run.summary.significant[0] == 0);
    for (const auto& o : run.outcomes) CHECK(o.p_value > 0.5);
}

TEST_CASE("running test: flags concentrate after a planted change point") {
    sim::ScenarioConfig cfg;
    cfg.days = 240;
    cfg.seed = 1234;
    cfg.volume.base_rate = 400;
    cfg.volume.overdispersion = 0.02;
    cfg.trajectory.kind = sim::PolarityTrajectory::Kind::ChangePoint;
    cfg.trajectory.change_day = 180;
    cfg.trajectory.p_before = {0.70, 0.165, 0.135};
    cfg.trajectory.p_after = {0.50, 0.275, 0.225};
    auto [series, ledger] = sim::simulate_series(cfg);
    auto run = running_test(series, 15, {1500, 10000, 5});

    const Date change = cfg.start_date + 180;
    std::size_t in_window = 0, in_window_days = 0, elsewhere = 0, elsewhere_days = 0;
    for (const auto& o : run.outcomes) {
        const bool inside = !(o.date < change) && o.date < change + 15;
        if (inside) {
            ++in_window_days;
            in_window += o.significant(0.05);
        } else {
            ++elsewhere_days;
            elsewhere += o.significant(0.05);
        }
    }
    // the running null absorbs the change within the window, so per-day
    // power decays over [180, 195); early days carry the detection
    CHECK(static_cast<double>(in_window) / in_window_days > 0.6);
    CHECK(static_cast<double>(elsewhere) / elsewhere_days < 0.25);
}

TEST_CASE("running test: zero pooled component with observed mass gives p = 0") {
    // the window never sees a contrary post, then one arrives
    auto series = constant_series(20, {50, 0, 10});
    series.days[18].nC = 10;
    auto run = running_test(series, 15);
    bool found = false;
    for (const auto& o : run.outcomes) {
        if (o.date == series.days[18].date) {
            found = true;
            CHECK(o.p_value == 0.0);
            CHECK(o.significant(0.01));
        } else {
            CHECK(o.p_value > 0.05);
        }
    }
    CHECK(found);
}

TEST_CASE("running test skips days with underfilled windows") {
    auto series = constant_series(40, {50, 30, 20});
    // zero out most of one window region
    for (int i = 16; i < 28; ++i) {
        series.days[i].nF = 0;
        series.days[i].nC = 0;
        series.days[i].nU = 0;
    }
    auto run = running_test(series, 15);
    // day 29 has only 2 non-zero predecessors in its window: skipped
    for (const auto& o : run.outcomes)
        CHECK(o.date != Date::from_ymd(2018, 1, 30));
    CHECK_THROWS_AS(running_test(constant_series(10, {5, 3, 2}), 15), ContractViolation);
}

TEST_CASE("window sensitivity covers the grid and rejects bad windows") {
    auto series = constant_series(60, {70, 20, 10});
    auto table = window_sensitivity(series, {7, 10, 15});
    REQUIRE(table.size() == 3);
    CHECK(table[0].window == 7);
    CHECK(table[2].summary.tested == 45);
    CHECK(window_sensitivity(series, {}).empty());
    CHECK_THROWS_AS(window_sensitivity(series, {60}), ContractViolation);
}

TEST_CASE("window sensitivity: change-point counts are stable across the grid") {
    sim::ScenarioConfig cfg;
    cfg.days = 365;
    cfg.seed = 757;
    cfg.volume.base_rate = 400;
    cfg.volume.overdispersion = 0.02;
    cfg.trajectory.kind = sim::PolarityTrajectory::Kind::ChangePoint;
    cfg.trajectory.change_day = 180;
    cfg.trajectory.p_before = {0.70, 0.165, 0.135};
    cfg.trajectory.p_after = {0.52, 0.264, 0.216};
    auto [series, ledger] = sim::simulate_series(cfg);
    auto table = window_sensitivity(series, {7, 10, 15, 20, 30}, {1500, 10000, 3});
    REQUIRE(table.size() == 5);
    std::size_t reference = 0;
    for (const auto& row : table)
        if (row.window == 15) reference = row.summary.significant[1];
    CHECK(reference > 0);
    for (const auto& row : table) {
        const double ratio =
            static_cast<double>(row.summary.significant[1]) / static_cast<double>(reference);
        CHECK(ratio >= 0.7);
        CHECK(ratio <= 1.3);
    }
}

TEST_CASE("variance test: central value is not flagged") {
    // construct a window whose sample variance equals sigma0^2 exactly
    polarity::PolaritySeries series;
    for (int i = 0; i < 15; ++i) {
        polarity::DailyPolarity d;
        d.date = Date::from_ymd(2018, 1, 1) + i;
        // alternate two values: variance of {a,b,...} is known
        d.nF = i % 2 == 0 ? 60 : 40;
        d.nC = i % 2 == 0 ? 25 : 35;
        d.nU = i % 2 == 0 ? 15 : 25;
        series.days.push_back(d);
    }
    std::vector<double> pf;
    for (const auto& d : series.days) pf.push_back(d.pF());
    double mean = 0;
    for (double v : pf) mean += v;
    mean /= pf.size();
    double ss = 0;
    for (double v : pf) ss += (v - mean) * (v - mean);
    const double sigma0 = ss / (pf.size() - 1);

    auto run = running_variance_test(series, 15, sigma0);
    REQUIRE(run.outcomes.size() == 1);
    CHECK(run.outcomes[0].statistic == doctest::Approx(14.0));
    CHECK(run.outcomes[0].p_value > 0.5);
    CHECK(!run.outcomes[0].significant(0.10));
}

TEST_CASE("variance test: constant window is an extreme left tail") {
    auto series = constant_series(20, {70, 20, 10});
    auto run = running_variance_test(series, 15, 0.01);
    REQUIRE(!run.outcomes.empty());
    for (const auto& o : run.outcomes) {
        CHECK(o.statistic == doctest::Approx(0.0));
        CHECK(o.significant(0.05));
    }
}

TEST_CASE("variance test: p-value invariant under adding a constant to pF") {
    // same variance pattern at two different levels of pF
    auto make = [](std::int64_t base_f) {
        polarity::PolaritySeries s;
        for (int i = 0; i < 15; ++i) {
            polarity::DailyPolarity d;
            d.date = Date::from_ymd(2018, 1, 1) + i;
            d.nF = base_f + (i % 3);  // small wiggle
            d.nC = 100 - d.nF;
            d.nU = 0;
            s.days.push_back(d);
        }
        return s;
    };
    const double sigma0 = 1e-4;
    auto low = running_variance_test(make(40), 15, sigma0);
    auto high = running_variance_test(make(70), 15, sigma0);
    REQUIRE(low.outcomes.size() == high.outcomes.size());
    for (std::size_t i = 0; i < low.outcomes.size(); ++i)
        CHECK(low.outcomes[i].p_value == doctest::Approx(high.outcomes[i].p_value).epsilon(1e-9));
}

TEST_CASE("variance test contract checks") {
    auto series = constant_series(20, {70, 20, 10});
    CHECK_THROWS_AS(running_variance_test(series, 15, 0.0), DegenerateNull);
    CHECK_THROWS_AS(running_variance_test(series, 2, 0.1), ContractViolation);
}

TEST_CASE("outcome csv format") {
    auto series = constant_series(3, {5, 3, 2});
    polarity::YearlySummary summary;
    summary.pooled = {0.5, 0.3, 0.2};
    auto run = basic_test(series, summary);
    std::ostringstream out;
    write_outcomes_csv(out, run);
    const std::string csv = out.str();
    CHECK(csv.find("date,method,statistic,p_value,sig10,sig05,sig01") == 0);
    CHECK(csv.find("2018-01-01,exact,") != std::string::npos);
}

TEST_SUITE_END();

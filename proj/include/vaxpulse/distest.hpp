#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vaxpulse/common.hpp"
#include "vaxpulse/polarity.hpp"

namespace vaxpulse::distest {

struct NullSpec {
    std::array<double, 3> p0{};  // (F, C, U), non-negative, sums to 1
    std::string source;          // "yearly" or "running-window(w)"
};

enum class Method { Exact, MonteCarlo, ChiSquare };

std::string method_name(Method m);

inline constexpr std::array<double, 3> kAlphas = {0.10, 0.05, 0.01};

struct TestOutcome {
    Date date;
    double statistic = 0;  // log pmf of the observed vector (multinomial tests)
                           // or the chi-square statistic (variance test)
    double p_value = 1;
    Method method = Method::Exact;

    bool significant(double alpha) const { return p_value <= alpha; }
};

struct TestSummary {
    std::size_t tested = 0;
    std::array<std::size_t, 3> significant{};  // per alpha in kAlphas

    double expected(double alpha) const { return alpha * static_cast<double>(tested); }
    void add(const TestOutcome& o);
};

struct TestRun {
    std::vector<TestOutcome> outcomes;
    TestSummary summary;
    NullSpec null_spec;  // for the basic test; running tests vary per day
};

// Exact multinomial goodness-of-fit p-value: the total null probability of
// all outcomes no more probable than the observed one. Enumeration is
// O(n^2) for three categories; beyond enumeration_bound the caller must use
// the Monte Carlo version (signalled by RequiresMonteCarlo).
double exact_multinomial_pvalue(const std::array<std::int64_t, 3>& counts,
                                const std::array<double, 3>& p0,
                                std::int64_t enumeration_bound = 200);

// Monte Carlo estimate of the same p-value with add-one correction:
// (1 + #{draws no more probable than observed}) / (reps + 1).
double mc_multinomial_pvalue(const std::array<std::int64_t, 3>& counts,
                             const std::array<double, 3>& p0, std::size_t reps,
                             std::uint64_t seed);

struct MultinomialTestConfig {
    std::int64_t exact_bound = 200;  // exact enumeration up to this n
    std::size_t mc_reps = 100000;
    std::uint64_t seed = 0;  // per-day MC seeds derive from this + date serial
};

// One test per non-zero day against the pooled yearly proportions.
TestRun basic_test(const polarity::PolaritySeries& series, const polarity::YearlySummary& summary,
                   const MultinomialTestConfig& cfg = {});

// One test per non-zero day against the pooled proportions of the preceding
// `window` calendar days (exclusive of the day under test). A day is tested
// only when at least ceil(window/2) of those days are non-zero.
TestRun running_test(const polarity::PolaritySeries& series, int window = 15,
                     const MultinomialTestConfig& cfg = {});

struct WindowSummary {
    int window = 0;
    TestSummary summary;
};

std::vector<WindowSummary> window_sensitivity(const polarity::PolaritySeries& series,
                                              const std::vector<int>& window_grid,
                                              const MultinomialTestConfig& cfg = {});

// Chi-square test of the trailing `window`-day variance of the favourable
// proportion against the whole-period variance sigma0_sq. Two-sided:
// p = min(1, 2 * min(P(X <= T), P(X >= T))) with T = (m-1) s^2 / sigma0_sq.
TestRun running_variance_test(const polarity::PolaritySeries& series, int window,
                              double sigma0_sq);

void write_outcomes_csv(std::ostream& out, const TestRun& run);
std::string summary_json(const TestRun& run);
std::string sensitivity_json(const std::vector<WindowSummary>& table);
void write_sensitivity_csv(std::ostream& out, const std::vector<WindowSummary>& table);

}  // namespace vaxpulse::distest

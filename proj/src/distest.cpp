#include "vaxpulse/distest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

namespace vaxpulse::distest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Relative tolerance when comparing outcome probabilities to the observed
// one: an outcome counts as "no more probable" when
// log P(x) <= log P(obs) + log1p(kRelTol). This absorbs floating-point noise
// in ties; the enumeration oracle in the tests mirrors the same rule.
constexpr double kRelTol = 1e-7;

void validate_null(const std::array<double, 3>& p0) {
    double sum = 0;
    for (double p : p0) {
        if (!(p >= 0)) throw ContractViolation("null proportions must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ContractViolation("null proportions must sum to 1, got " + format_double(sum));
}

struct LogPmf {
    // lgamma(k+1) table for k = 0..n plus log p components; evaluating one
    // outcome is then three table lookups and a dot product.
    std::vector<double> lgamma_table;
    std::array<double, 3> logp{};
    double lgamma_n1 = 0;

    LogPmf(std::int64_t n, const std::array<double, 3>& p0) {
        lgamma_table.resize(static_cast<std::size_t>(n) + 1);
        for (std::int64_t k = 0; k <= n; ++k)
            lgamma_table[static_cast<std::size_t>(k)] = std::lgamma(static_cast<double>(k) + 1.0);
        lgamma_n1 = lgamma_table[static_cast<std::size_t>(n)];
        for (int j = 0; j < 3; ++j) logp[j] = p0[j] > 0 ? std::log(p0[j]) : kNegInf;
    }

    double operator()(std::int64_t a, std::int64_t b, std::int64_t c) const {
        double lp = lgamma_n1 - lgamma_table[static_cast<std::size_t>(a)] -
                    lgamma_table[static_cast<std::size_t>(b)] -
                    lgamma_table[static_cast<std::size_t>(c)];
        // 0 * log(0) = 0: skip zero counts so impossible outcomes only arise
        // from positive counts on zero-probability categories
        if (a > 0) lp += static_cast<double>(a) * logp[0];
        if (b > 0) lp += static_cast<double>(b) * logp[1];
        if (c > 0) lp += static_cast<double>(c) * logp[2];
        return lp;
    }
};

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::Exact: return "exact";
        case Method::MonteCarlo: return "monte-carlo";
        case Method::ChiSquare: return "chi-square";
    }
    throw ContractViolation("invalid method value");
}

void TestSummary::add(const TestOutcome& o) {
    ++tested;
    for (std::size_t i = 0; i < kAlphas.size(); ++i)
        if (o.significant(kAlphas[i])) ++significant[i];
}

double exact_multinomial_pvalue(const std::array<std::int64_t, 3>& counts,
                                const std::array<double, 3>& p0,
                                std::int64_t enumeration_bound) {
    validate_null(p0);
    const std::int64_t n = counts[0] + counts[1] + counts[2];
    for (auto c : counts)
        if (c < 0) throw ContractViolation("counts must be non-negative");
    if (n < 1) throw ContractViolation("exact test: total count must be >= 1");
    if (n > enumeration_bound)
        throw RequiresMonteCarlo("exact test: n = " + std::to_string(n) +
                                 " exceeds enumeration bound " +
                                 std::to_string(enumeration_bound));

    const LogPmf logpmf(n, p0);
    const double lp_obs = logpmf(counts[0], counts[1], counts[2]);
    const double threshold = lp_obs + std::log1p(kRelTol);

    // Kahan-compensated sum over all C(n+2,2) outcomes with P(x) <= P(obs)
    double sum = 0, comp = 0;
    for (std::int64_t a = 0; a <= n; ++a) {
        for (std::int64_t b = 0; b <= n - a; ++b) {
            const double lp = logpmf(a, b, n - a - b);
            if (lp <= threshold) {
                const double term = lp == kNegInf ? 0.0 : std::exp(lp);
                const double y = term - comp;
                const double t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
        }
    }
    if (lp_obs == kNegInf) return 0.0;  // observed impossible under the null
    return std::min(sum, 1.0);
}

double mc_multinomial_pvalue(const std::array<std::int64_t, 3>& counts,
                             const std::array<double, 3>& p0, std::size_t reps,
                             std::uint64_t seed) {
    validate_null(p0);
    const std::int64_t n = counts[0] + counts[1] + counts[2];
    for (auto c : counts)
        if (c < 0) throw ContractViolation("counts must be non-negative");
    if (n < 1) throw ContractViolation("mc test: total count must be >= 1");
    if (reps < 10000) throw ContractViolation("mc test: reps must be >= 10000");

    const LogPmf logpmf(n, p0);
    const double threshold = logpmf(counts[0], counts[1], counts[2]) + std::log1p(kRelTol);

    std::mt19937_64 rng(seed);
    const double p_rest = p0[1] + p0[2];
    const double p_cond = p_rest > 0 ? p0[1] / p_rest : 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        std::int64_t a = 0, b = 0;
        if (p0[0] >= 1.0) {
            a = n;
        } else {
            std::binomial_distribution<std::int64_t> first(n, p0[0]);
            a = first(rng);
        }
        const std::int64_t rest = n - a;
        if (rest > 0) {
            if (p_cond >= 1.0) {
                b = rest;
            } else if (p_cond > 0.0) {
                std::binomial_distribution<std::int64_t> second(rest, p_cond);
                b = second(rng);
            }
        }
        if (logpmf(a, b, n - a - b) <= threshold) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(reps + 1);
}

namespace {

TestOutcome day_multinomial_outcome(const polarity::DailyPolarity& day,
                                    const std::array<double, 3>& p0,
                                    const MultinomialTestConfig& cfg) {
    TestOutcome o;
    o.date = day.date;
    const auto counts = day.counts();
    const std::int64_t n = day.n();
    const LogPmf logpmf(n, p0);
    o.statistic = logpmf(counts[0], counts[1], counts[2]);
    if (n <= cfg.exact_bound) {
        o.method = Method::Exact;
        o.p_value = exact_multinomial_pvalue(counts, p0, cfg.exact_bound);
    } else {
        o.method = Method::MonteCarlo;
        o.p_value = mc_multinomial_pvalue(
            counts, p0, cfg.mc_reps,
            derive_seed(cfg.seed, static_cast<std::uint64_t>(day.date.serial())));
    }
    return o;
}

}  // namespace

TestRun basic_test(const polarity::PolaritySeries& series, const polarity::YearlySummary& summary,
                   const MultinomialTestConfig& cfg) {
    TestRun run;
    run.null_spec = {summary.pooled, "yearly"};
    validate_null(run.null_spec.p0);
    for (const auto& day : series.days) {
        if (day.n() == 0) continue;
        TestOutcome o = day_multinomial_outcome(day, run.null_spec.p0, cfg);
        run.summary.add(o);
        run.outcomes.push_back(o);
    }
    return run;
}

TestRun running_test(const polarity::PolaritySeries& series, int window,
                     const MultinomialTestConfig& cfg) {
    if (window < 1) throw ContractViolation("running_test: window must be >= 1");
    if (series.days.size() <= static_cast<std::size_t>(window))
        throw ContractViolation("running_test: series not longer than window");

    TestRun run;
    run.null_spec.source = "running-window(" + std::to_string(window) + ")";
    const int min_nonzero = (window + 1) / 2;
    for (std::size_t d = 0; d < series.days.size(); ++d) {
        const auto& day = series.days[d];
        if (day.n() == 0) continue;
        if (d < static_cast<std::size_t>(window)) continue;
        std::array<double, 3> pooled{};
        int nonzero = 0;
        for (std::size_t k = d - static_cast<std::size_t>(window); k < d; ++k) {
            const auto& prev = series.days[k];
            if (prev.n() == 0) continue;
            ++nonzero;
            pooled[0] += static_cast<double>(prev.nF);
            pooled[1] += static_cast<double>(prev.nC);
            pooled[2] += static_cast<double>(prev.nU);
        }
        if (nonzero < min_nonzero) continue;
        const double total = pooled[0] + pooled[1] + pooled[2];
        for (auto& p : pooled) p /= total;
        TestOutcome o = day_multinomial_outcome(day, pooled, cfg);
        run.summary.add(o);
        run.outcomes.push_back(o);
    }
    return run;
}

std::vector<WindowSummary> window_sensitivity(const polarity::PolaritySeries& series,
                                              const std::vector<int>& window_grid,
                                              const MultinomialTestConfig& cfg) {
    std::vector<WindowSummary> table;
    for (int w : window_grid) {
        if (series.days.size() <= static_cast<std::size_t>(w))
            throw ContractViolation("window_sensitivity: window " + std::to_string(w) +
                                    " not shorter than series");
        table.push_back({w, running_test(series, w, cfg).summary});
    }
    return table;
}

TestRun running_variance_test(const polarity::PolaritySeries& series, int window,
                              double sigma0_sq) {
    if (window < 3) throw ContractViolation("running_variance_test: window must be >= 3");
    if (!(sigma0_sq > 0)) throw DegenerateNull("running_variance_test: sigma0^2 must be > 0");

    TestRun run;
    run.null_spec.source = "running-variance(" + std::to_string(window) + ")";
    for (std::size_t d = 0; d < series.days.size(); ++d) {
        if (d + 1 < static_cast<std::size_t>(window)) continue;
        const auto& day = series.days[d];
        if (day.n() == 0) continue;
        // trailing window, inclusive of the tested day; non-zero days only
        std::vector<double> pf;
        for (std::size_t k = d + 1 - static_cast<std::size_t>(window); k <= d; ++k)
            if (series.days[k].n() > 0) pf.push_back(series.days[k].pF());
        const auto m = static_cast<int>(pf.size());
        if (m < 3) continue;
        double mean = 0;
        for (double v : pf) mean += v;
        mean /= m;
        double ss = 0;
        for (double v : pf) ss += (v - mean) * (v - mean);
        const double s2 = ss / (m - 1);
        const double stat = static_cast<double>(m - 1) * s2 / sigma0_sq;

        boost::math::chi_squared dist(m - 1);
        const double lower = boost::math::cdf(dist, stat);
        const double upper = boost::math::cdf(boost::math::complement(dist, stat));
        TestOutcome o;
        o.date = day.date;
        o.method = Method::ChiSquare;
        o.statistic = stat;
        o.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
        run.summary.add(o);
        run.outcomes.push_back(o);
    }
    return run;
}

void write_outcomes_csv(std::ostream& out, const TestRun& run) {
    out << "date,method,statistic,p_value,sig10,sig05,sig01\n";
    for (const auto& o : run.outcomes) {
        out << o.date.to_string() << ',' << method_name(o.method) << ','
            << format_double(o.statistic) << ',' << format_double(o.p_value) << ','
            << (o.significant(0.10) ? 1 : 0) << ',' << (o.significant(0.05) ? 1 : 0) << ','
            << (o.significant(0.01) ? 1 : 0) << '\n';
    }
}

namespace {

nlohmann::json summary_to_json(const TestSummary& s) {
    nlohmann::json alphas = nlohmann::json::array();
    for (std::size_t i = 0; i < kAlphas.size(); ++i) {
        alphas.push_back({{"alpha", kAlphas[i]},
                          {"significant_days", s.significant[i]},
                          {"expected_under_null", s.expected(kAlphas[i])}});
    }
    return {{"tested_days", s.tested}, {"levels", alphas}};
}

}  // namespace

std::string summary_json(const TestRun& run) {
    nlohmann::json j = summary_to_json(run.summary);
    j["null"] = {{"source", run.null_spec.source}};
    if (run.null_spec.source == "yearly")
        j["null"]["p0"] = {{"F", run.null_spec.p0[0]},
                           {"C", run.null_spec.p0[1]},
                           {"U", run.null_spec.p0[2]}};
    return j.dump(2);
}

std::string sensitivity_json(const std::vector<WindowSummary>& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table) {
        nlohmann::json e = summary_to_json(row.summary);
        e["window"] = row.window;
        rows.push_back(std::move(e));
    }
    return nlohmann::json{{"windows", std::move(rows)}}.dump(2);
}

void write_sensitivity_csv(std::ostream& out, const std::vector<WindowSummary>& table) {
    out << "window,tested,sig10,sig05,sig01\n";
    for (const auto& row : table) {
        out << row.window << ',' << row.summary.tested << ',' << row.summary.significant[0] << ','
            << row.summary.significant[1] << ',' << row.summary.significant[2] << '\n';
    }
}

}  // namespace vaxpulse::distest

#include "vaxpulse/polarity.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include <json.hpp>

namespace vaxpulse::polarity {

std::size_t PolaritySeries::nonzero_days() const {
    std::size_t k = 0;
    for (const auto& d : days) k += d.n() > 0;
    return k;
}

std::int64_t PolaritySeries::total_posts() const {
    std::int64_t t = 0;
    for (const auto& d : days) t += d.n();
    return t;
}

PolaritySeries aggregate(
    const ingest::Corpus& corpus,
    const std::unordered_map<std::string, classify::PolarityLabel>& predictions,
    std::optional<Date> span_start, std::optional<Date> span_end) {
    std::unordered_map<std::string, Date> post_dates;
    post_dates.reserve(corpus.posts.size());
    for (const auto& p : corpus.posts) post_dates.emplace(p.id, p.date());

    std::vector<std::string> missing;
    for (const auto& [id, label] : predictions) {
        (void)label;
        if (!post_dates.count(id)) {
            missing.push_back(id);
            if (missing.size() >= 10) break;
        }
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        std::string msg = "aggregate: prediction ids not in corpus:";
        for (const auto& id : missing) msg += " " + id;
        throw ContractViolation(msg);
    }

    // span defaults to the corpus date range
    std::optional<Date> lo = span_start, hi = span_end;
    if ((!lo || !hi) && !corpus.posts.empty()) {
        Date min_d = corpus.posts.front().date(), max_d = min_d;
        for (const auto& p : corpus.posts) {
            min_d = std::min(min_d, p.date());
            max_d = std::max(max_d, p.date());
        }
        if (!lo) lo = min_d;
        if (!hi) hi = max_d;
    }
    PolaritySeries series;
    if (!lo || !hi || *hi < *lo) return series;

    series.days.resize(static_cast<std::size_t>(*hi - *lo) + 1);
    for (std::size_t i = 0; i < series.days.size(); ++i)
        series.days[i].date = *lo + static_cast<int>(i);

    for (const auto& p : corpus.posts) {
        auto it = predictions.find(p.id);
        if (it == predictions.end()) continue;
        Date d = p.date();
        if (d < *lo || *hi < d) continue;
        auto& day = series.days[static_cast<std::size_t>(d - *lo)];
        switch (it->second) {
            case classify::PolarityLabel::Favourable: ++day.nF; break;
            case classify::PolarityLabel::Contrary: ++day.nC; break;
            case classify::PolarityLabel::Undecided: ++day.nU; break;
            case classify::PolarityLabel::OutOfContext: break;  // dropped
        }
    }
    return series;
}

namespace {

std::array<double, 3> pooled_proportions(const std::vector<std::array<std::int64_t, 3>>& counts) {
    std::array<double, 3> sums{};
    for (const auto& c : counts)
        for (int j = 0; j < 3; ++j) sums[j] += static_cast<double>(c[j]);
    double total = sums[0] + sums[1] + sums[2];
    if (total <= 0) return {0, 0, 0};
    std::array<double, 3> p{};
    for (int j = 0; j < 3; ++j) p[j] = sums[j] / total;
    double norm = p[0] + p[1] + p[2];
    for (int j = 0; j < 3; ++j) p[j] /= norm;
    return p;
}

double percentile(std::vector<double>& sorted_values, double q) {
    // linear interpolation between order statistics
    if (sorted_values.empty()) return 0;
    const double pos = q * (static_cast<double>(sorted_values.size()) - 1);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= sorted_values.size()) return sorted_values.back();
    const double frac = pos - static_cast<double>(i);
    return sorted_values[i] * (1 - frac) + sorted_values[i + 1] * frac;
}

}  // namespace

YearlySummary pooled_summary(const PolaritySeries& series) {
    std::vector<std::array<std::int64_t, 3>> counts;
    std::vector<double> daily_pF;
    for (const auto& d : series.days) {
        if (d.n() == 0) continue;
        counts.push_back(d.counts());
        daily_pF.push_back(d.pF());
    }
    if (counts.empty()) throw InsufficientData("pooled_summary: no non-zero days");

    YearlySummary s;
    s.days_used = counts.size();
    s.pooled = pooled_proportions(counts);
    s.hesitancy = 1.0 - s.pooled[0];

    if (daily_pF.size() >= 2) {
        double mean = 0;
        for (double v : daily_pF) mean += v;
        mean /= static_cast<double>(daily_pF.size());
        double ss = 0;
        for (double v : daily_pF) ss += (v - mean) * (v - mean);
        s.var_pF = ss / (static_cast<double>(daily_pF.size()) - 1);
    }
    return s;
}

YearlySummary yearly_summary(const PolaritySeries& series, std::size_t boot_reps,
                             std::uint64_t seed) {
    if (boot_reps < 1) throw ContractViolation("yearly_summary: boot_reps must be >= 1");
    std::vector<std::array<std::int64_t, 3>> counts;
    for (const auto& d : series.days)
        if (d.n() > 0) counts.push_back(d.counts());
    if (counts.size() < 30)
        throw InsufficientData("yearly_summary: need at least 30 non-zero days, have " +
                               std::to_string(counts.size()));

    YearlySummary s = pooled_summary(series);
    s.boot_reps = boot_reps;
    s.seed = seed;

    const std::size_t D = counts.size();
    std::array<std::vector<double>, 3> reps;
    for (auto& r : reps) r.resize(boot_reps);
    std::vector<std::array<std::int64_t, 3>> sample(D);
    for (std::size_t r = 0; r < boot_reps; ++r) {
        std::mt19937_64 rng(derive_seed(seed, r));
        std::uniform_int_distribution<std::size_t> pick(0, D - 1);
        for (std::size_t i = 0; i < D; ++i) sample[i] = counts[pick(rng)];
        auto p = pooled_proportions(sample);
        for (int j = 0; j < 3; ++j) reps[j][r] = p[j];
    }
    for (int j = 0; j < 3; ++j) {
        std::sort(reps[j].begin(), reps[j].end());
        s.ci[j].lower = percentile(reps[j], 0.025);
        s.ci[j].upper = percentile(reps[j], 0.975);
    }
    return s;
}

std::string YearlySummary::to_json() const {
    nlohmann::json j;
    j["pooled"] = {{"F", pooled[0]}, {"C", pooled[1]}, {"U", pooled[2]}};
    j["hesitancy"] = hesitancy;
    j["ci_method"] = "day-level bootstrap percentile; days are resampled rather than posts "
                     "because daily proportions cluster";
    j["ci"] = {{"F", {{"lower", ci[0].lower}, {"upper", ci[0].upper}}},
               {"C", {{"lower", ci[1].lower}, {"upper", ci[1].upper}}},
               {"U", {{"lower", ci[2].lower}, {"upper", ci[2].upper}}}};
    j["var_daily_pF"] = var_pF;
    j["days_used"] = days_used;
    j["boot_reps"] = boot_reps;
    j["seed"] = seed;
    return j.dump(2);
}

void write_series_csv(std::ostream& out, const PolaritySeries& series) {
    out << "date,nF,nC,nU,n,pF,pC,pU\n";
    for (const auto& d : series.days) {
        out << d.date.to_string() << ',' << d.nF << ',' << d.nC << ',' << d.nU << ',' << d.n()
            << ',' << format_double(d.pF()) << ',' << format_double(d.pC()) << ','
            << format_double(d.pU()) << '\n';
    }
}

PolaritySeries read_series_csv(std::istream& in) {
    PolaritySeries series;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#' || line.rfind("date,", 0) == 0) continue;
        auto fields = split(line, ',');
        if (fields.size() < 4) throw ContractViolation("series csv: bad row: " + line);
        auto date = Date::from_string(fields[0]);
        if (!date) throw ContractViolation("series csv: bad date: " + fields[0]);
        DailyPolarity d;
        d.date = *date;
        d.nF = std::stoll(fields[1]);
        d.nC = std::stoll(fields[2]);
        d.nU = std::stoll(fields[3]);
        if (!series.days.empty() && !(series.days.back().date < d.date))
            throw ContractViolation("series csv: dates not strictly increasing");
        if (!series.days.empty() && d.date - series.days.back().date != 1)
            throw ContractViolation("series csv: dates not contiguous");
        series.days.push_back(d);
    }
    return series;
}

}  // namespace vaxpulse::polarity

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vaxpulse/classify.hpp"
#include "vaxpulse/common.hpp"
#include "vaxpulse/ingest.hpp"

namespace vaxpulse::polarity {

struct DailyPolarity {
    Date date;
    std::int64_t nF = 0, nC = 0, nU = 0;

    std::int64_t n() const { return nF + nC + nU; }
    double pF() const { return n() > 0 ? static_cast<double>(nF) / n() : 0.0; }
    double pC() const { return n() > 0 ? static_cast<double>(nC) / n() : 0.0; }
    double pU() const { return n() > 0 ? static_cast<double>(nU) / n() : 0.0; }
    std::array<std::int64_t, 3> counts() const { return {nF, nC, nU}; }
};

// Contiguous daily counts over the study span; days with no retained posts
// have n() == 0 and are skipped by the tests downstream.
struct PolaritySeries {
    std::vector<DailyPolarity> days;

    std::size_t nonzero_days() const;
    std::int64_t total_posts() const;
};

// Join predictions onto the corpus by post id and count daily F/C/U; posts
// predicted out-of-context are dropped before aggregation. Prediction ids
// that do not resolve into the corpus violate the contract.
PolaritySeries aggregate(const ingest::Corpus& corpus,
                         const std::unordered_map<std::string, classify::PolarityLabel>& predictions,
                         std::optional<Date> span_start = std::nullopt,
                         std::optional<Date> span_end = std::nullopt);

struct YearlySummary {
    std::array<double, 3> pooled{};  // renormalized to sum exactly 1
    double hesitancy = 0;            // 1 - pooled F
    struct Ci {
        double lower = 0, upper = 0;
    };
    std::array<Ci, 3> ci{};  // day-level bootstrap percentile intervals, 95%
    double var_pF = 0;       // sample variance of daily pF over non-zero days
    std::size_t days_used = 0;
    std::size_t boot_reps = 0;
    std::uint64_t seed = 0;

    std::string to_json() const;
};

// Pooled proportions with day-level bootstrap CIs: days are resampled with
// replacement and the pooled proportions recomputed; replicate seeds derive
// from the master seed by replicate index.
YearlySummary yearly_summary(const PolaritySeries& series, std::size_t boot_reps,
                             std::uint64_t seed);

// Pooled proportions and daily-pF variance only; what the tests need when no
// confidence intervals are wanted.
YearlySummary pooled_summary(const PolaritySeries& series);

void write_series_csv(std::ostream& out, const PolaritySeries& series);
PolaritySeries read_series_csv(std::istream& in);

}  // namespace vaxpulse::polarity

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vaxpulse/classify.hpp"
#include "vaxpulse/common.hpp"
#include "vaxpulse/distest.hpp"
#include "vaxpulse/polarity.hpp"

namespace vaxpulse::sim {

struct SpikeEvent {
    int day = 0;
    double multiplier = 1.0;
};

// Daily post volume: negative binomial via a gamma-Poisson mixture with
// variance mean * (1 + overdispersion * mean); overdispersion 0 is Poisson.
struct VolumeModel {
    double base_rate = 400;
    double overdispersion = 0.05;
    std::vector<SpikeEvent> spikes;
};

// Polarity trajectory over the study span. pF(t) is clipped to [0.01, 0.99]
// and the complementary mass splits between C and U at contrary_share.
struct PolarityTrajectory {
    enum class Kind { Constant, ChangePoint, Parabolic };
    Kind kind = Kind::Constant;

    std::array<double, 3> p_const{0.7, 0.165, 0.135};

    int change_day = 0;  // first day the post-change vector applies
    std::array<double, 3> p_before{}, p_after{};

    double peak_day = 140, peak_value = 0.76, end_value = 0.69;
    double contrary_share = 0.548;  // C share of 1 - pF in the parabolic mode

    std::array<double, 3> at(int day, int total_days) const;
};

struct TextModel {
    std::array<std::vector<std::string>, classify::kNumClasses> class_markers;
    std::vector<std::string> noise_tokens;
    int markers_per_post = 3;
    int noise_per_post = 5;

    static TextModel default_markers();
};

struct ScenarioConfig {
    int days = 365;
    Date start_date = Date::from_ymd(2018, 1, 1);
    VolumeModel volume;
    PolarityTrajectory trajectory;
    TextModel text = TextModel::default_markers();
    double p_ooc = 0.0;               // share of posts that are out of context
    double duplicate_fraction = 0.0;  // planted duplicate ids (posts mode)
    std::uint64_t seed = 0;

    std::string to_json() const;
    static ScenarioConfig from_json(std::string_view payload);

    // 365 days of 2018, parabolic favourable trend peaking near day 140 and
    // ending 7 points below the peak, three volume spikes at the days of the
    // year's main triggering events.
    static ScenarioConfig paper_shaped(std::uint64_t seed);
};

struct LedgerDay {
    Date date;
    std::array<double, 3> p{};
    std::int64_t n_total = 0;  // posts that day, including out-of-context
    bool spike = false;
};

struct ScenarioLedger {
    std::vector<LedgerDay> days;
    std::vector<SpikeEvent> spikes;
    std::optional<int> change_day;
    std::optional<double> planted_peak_day;
    std::optional<double> planted_decline;
    std::vector<std::pair<std::string, classify::PolarityLabel>> post_labels;  // posts mode
    std::size_t unique_posts = 0;
    std::size_t planted_duplicates = 0;

    std::string to_json() const;
};

// Daily polarity counts with known ground truth.
std::pair<polarity::PolaritySeries, ScenarioLedger> simulate_series(const ScenarioConfig& config);

// JSONL post stream plus a ground-truth labels file; texts are class marker
// tokens plus shared noise so a classifier can be trained end to end.
ScenarioLedger simulate_posts(const ScenarioConfig& config, std::ostream& jsonl_out,
                              std::ostream& labels_out);

enum class TestKind { Basic, Running, RunningVariance };

std::string test_kind_name(TestKind kind);

struct CalibrationLevel {
    double alpha = 0;
    double mean_fraction = 0;  // mean flagged fraction across replicates
    double ci_lower = 0, ci_upper = 0;
};

struct CalibrationResult {
    TestKind test;
    int replicates = 0;
    std::size_t tested_days_total = 0;
    std::array<CalibrationLevel, 3> levels;  // per alpha in distest::kAlphas

    std::string to_json() const;
};

// Type-I calibration: replicate the null scenario, run the test, and report
// the mean flagged fraction per significance level with a normal-theory CI
// over replicates. Replicates run in parallel with counter-derived seeds.
CalibrationResult calibrate_type1(TestKind test, const ScenarioConfig& null_config,
                                  int replicates, const distest::MultinomialTestConfig& cfg = {},
                                  int window = 15, int threads = 0);

struct PowerLevel {
    double alpha = 0;
    double detection_fraction = 0;    // flagged share of days in the detection window
    double detection_probability = 0; // share of replicates with any flag in the window
    double localization = 0;          // share of all flags inside the detection window
};

struct PowerResult {
    TestKind test;
    int replicates = 0;
    int change_day = 0;
    int detect_days = 15;  // detection window [change_day, change_day + detect_days)
    std::array<PowerLevel, 3> levels;

    std::string to_json() const;
};

PowerResult power_study(TestKind test, const ScenarioConfig& alternative, int replicates,
                        int detect_days = 15, const distest::MultinomialTestConfig& cfg = {},
                        int window = 15, int threads = 0);

}  // namespace vaxpulse::sim

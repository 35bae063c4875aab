#include "vaxpulse/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

namespace vaxpulse::sim {

using nlohmann::json;

std::array<double, 3> PolarityTrajectory::at(int day, int total_days) const {
    switch (kind) {
        case Kind::Constant: {
            auto p = p_const;
            const double sum = p[0] + p[1] + p[2];
            for (auto& v : p) v /= sum;
            return p;
        }
        case Kind::ChangePoint: {
            auto p = day < change_day ? p_before : p_after;
            const double sum = p[0] + p[1] + p[2];
            for (auto& v : p) v /= sum;
            return p;
        }
        case Kind::Parabolic: {
            const double span_end = static_cast<double>(total_days - 1);
            const double denom = (span_end - peak_day) * (span_end - peak_day);
            const double a = denom > 0 ? (end_value - peak_value) / denom : 0.0;
            double pf = peak_value + a * (day - peak_day) * (day - peak_day);
            pf = std::clamp(pf, 0.01, 0.99);
            const double rest = 1.0 - pf;
            return {pf, rest * contrary_share, rest * (1.0 - contrary_share)};
        }
    }
    throw ContractViolation("invalid trajectory kind");
}

TextModel TextModel::default_markers() {
    TextModel model;
    model.class_markers[0] = {"sostengo", "fiducia", "proteggere", "#iovaccino", "scienza"};
    model.class_markers[1] = {"obbligo", "contrari", "#novax", "rischi", "dannosi"};
    model.class_markers[2] = {"dubbio", "incerto", "capire", "domande", "forse"};
    model.class_markers[3] = {"notizia", "articolo", "leggi", "link", "gazzetta"};
    model.noise_tokens = {"vaccino", "vaccini", "oggi",  "anno",  "bambini",
                          "scuola",  "governo", "salute", "perche", "sempre"};
    return model;
}

namespace {

std::int64_t draw_volume(const VolumeModel& vm, std::mt19937_64& rng) {
    double lambda = vm.base_rate;
    if (vm.overdispersion > 1e-12) {
        const double shape = 1.0 / vm.overdispersion;
        std::gamma_distribution<double> gamma(shape, vm.overdispersion * vm.base_rate);
        lambda = gamma(rng);
    }
    if (lambda <= 0) return 0;
    std::poisson_distribution<std::int64_t> poisson(lambda);
    return poisson(rng);
}

std::array<std::int64_t, 3> draw_multinomial3(std::int64_t n, const std::array<double, 3>& p,
                                              std::mt19937_64& rng) {
    std::array<std::int64_t, 3> out{};
    if (n <= 0) return out;
    if (p[0] >= 1.0) {
        out[0] = n;
        return out;
    }
    std::binomial_distribution<std::int64_t> first(n, p[0]);
    out[0] = first(rng);
    const std::int64_t rest = n - out[0];
    const double p_rest = p[1] + p[2];
    if (rest > 0 && p_rest > 0) {
        const double cond = std::min(1.0, p[1] / p_rest);
        if (cond >= 1.0) {
            out[1] = rest;
        } else if (cond > 0) {
            std::binomial_distribution<std::int64_t> second(rest, cond);
            out[1] = second(rng);
        }
    }
    out[2] = n - out[0] - out[1];
    return out;
}

void fill_ledger_day(LedgerDay& day, const ScenarioConfig& cfg, int d, std::int64_t n) {
    day.date = cfg.start_date + d;
    day.p = cfg.trajectory.at(d, cfg.days);
    day.n_total = n;
}

std::int64_t day_volume(const ScenarioConfig& cfg, int d, std::mt19937_64& rng, bool& spiked) {
    std::int64_t n = draw_volume(cfg.volume, rng);
    spiked = false;
    for (const auto& s : cfg.volume.spikes) {
        if (s.day == d) {
            n = std::llround(static_cast<double>(n) * s.multiplier);
            spiked = true;
        }
    }
    return n;
}

void note_planted_truth(ScenarioLedger& ledger, const ScenarioConfig& cfg) {
    ledger.spikes = cfg.volume.spikes;
    if (cfg.trajectory.kind == PolarityTrajectory::Kind::ChangePoint)
        ledger.change_day = cfg.trajectory.change_day;
    if (cfg.trajectory.kind == PolarityTrajectory::Kind::Parabolic) {
        ledger.planted_peak_day = cfg.trajectory.peak_day;
        ledger.planted_decline = cfg.trajectory.end_value - cfg.trajectory.peak_value;
    }
}

}  // namespace

std::pair<polarity::PolaritySeries, ScenarioLedger> simulate_series(const ScenarioConfig& cfg) {
    polarity::PolaritySeries series;
    ScenarioLedger ledger;
    note_planted_truth(ledger, cfg);
    for (int d = 0; d < cfg.days; ++d) {
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(d)));
        LedgerDay led;
        bool spiked = false;
        const std::int64_t n = day_volume(cfg, d, rng, spiked);
        fill_ledger_day(led, cfg, d, n);
        led.spike = spiked;

        polarity::DailyPolarity day;
        day.date = led.date;
        auto counts = draw_multinomial3(n, led.p, rng);
        day.nF = counts[0];
        day.nC = counts[1];
        day.nU = counts[2];
        series.days.push_back(day);
        ledger.days.push_back(led);
    }
    return {std::move(series), std::move(ledger)};
}

ScenarioLedger simulate_posts(const ScenarioConfig& cfg, std::ostream& jsonl_out,
                              std::ostream& labels_out) {
    if (cfg.text.markers_per_post < 1)
        throw ContractViolation("simulate_posts: text model needs markers_per_post >= 1");
    ScenarioLedger ledger;
    note_planted_truth(ledger, cfg);

    struct PendingPost {
        std::string id;
        std::string line;
    };
    std::vector<PendingPost> stream;
    std::vector<std::pair<std::string, classify::PolarityLabel>> labels;
    std::uint64_t next_id = 100000;

    for (int d = 0; d < cfg.days; ++d) {
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(d)));
        LedgerDay led;
        bool spiked = false;
        const std::int64_t n = day_volume(cfg, d, rng, spiked);
        fill_ledger_day(led, cfg, d, n);
        led.spike = spiked;
        ledger.days.push_back(led);

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> second_of_day(0, 86399);
        for (std::int64_t i = 0; i < n; ++i) {
            classify::PolarityLabel label;
            if (unit(rng) < cfg.p_ooc) {
                label = classify::PolarityLabel::OutOfContext;
            } else {
                const double r = unit(rng);
                if (r < led.p[0])
                    label = classify::PolarityLabel::Favourable;
                else if (r < led.p[0] + led.p[1])
                    label = classify::PolarityLabel::Contrary;
                else
                    label = classify::PolarityLabel::Undecided;
            }
            const auto& markers = cfg.text.class_markers[static_cast<int>(label)];
            if (markers.empty())
                throw ContractViolation("simulate_posts: no marker tokens for class " +
                                        classify::label_code(label));
            std::string text;
            std::uniform_int_distribution<std::size_t> pick_marker(0, markers.size() - 1);
            for (int k = 0; k < cfg.text.markers_per_post; ++k) {
                if (!text.empty()) text += ' ';
                text += markers[pick_marker(rng)];
            }
            if (!cfg.text.noise_tokens.empty()) {
                std::uniform_int_distribution<std::size_t> pick_noise(
                    0, cfg.text.noise_tokens.size() - 1);
                for (int k = 0; k < cfg.text.noise_per_post; ++k)
                    text += ' ' + cfg.text.noise_tokens[pick_noise(rng)];
            }
            // occasional mention/url so ingestion and tokenization get real work
            if (unit(rng) < 0.15) text = "@utente" + std::to_string(next_id % 97) + " " + text;
            if (unit(rng) < 0.10) text += " https://t.co/" + std::to_string(next_id % 89);

            const int sec = second_of_day(rng);
            char ts[32];
            std::snprintf(ts, sizeof ts, "%sT%02d:%02d:%02dZ", led.date.to_string().c_str(),
                          sec / 3600, sec / 60 % 60, sec % 60);
            std::string id = std::to_string(next_id++);
            json rec{{"id", id},
                     {"created_at", ts},
                     {"text", text},
                     {"retweets", static_cast<int>(unit(rng) * 20)},
                     {"likes", static_cast<int>(unit(rng) * 50)},
                     {"lang", "it"}};
            stream.push_back({id, rec.dump()});
            labels.emplace_back(std::move(id), label);
        }
    }
    ledger.unique_posts = stream.size();

    // plant duplicates: copies of random originals, appended in shuffled
    // order after the originals so first-wins keeps every original
    if (cfg.duplicate_fraction > 0 && !stream.empty()) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0xD0D0ull));
        const auto dups =
            static_cast<std::size_t>(cfg.duplicate_fraction * static_cast<double>(stream.size()));
        std::uniform_int_distribution<std::size_t> pick(0, stream.size() - 1);
        std::vector<PendingPost> copies;
        for (std::size_t k = 0; k < dups; ++k) copies.push_back(stream[pick(rng)]);
        std::shuffle(copies.begin(), copies.end(), rng);
        ledger.planted_duplicates = copies.size();
        for (auto& c : copies) stream.push_back(std::move(c));
    }

    for (const auto& post : stream) jsonl_out << post.line << '\n';
    classify::write_labels_csv(labels_out, labels);
    ledger.post_labels = std::move(labels);
    return ledger;
}

std::string test_kind_name(TestKind kind) {
    switch (kind) {
        case TestKind::Basic: return "basic";
        case TestKind::Running: return "running";
        case TestKind::RunningVariance: return "variance";
    }
    throw ContractViolation("invalid test kind");
}

namespace {

distest::TestRun run_test(TestKind test, const polarity::PolaritySeries& series,
                          const distest::MultinomialTestConfig& cfg, int window) {
    switch (test) {
        case TestKind::Basic:
            return distest::basic_test(series, polarity::pooled_summary(series), cfg);
        case TestKind::Running: return distest::running_test(series, window, cfg);
        case TestKind::RunningVariance: {
            auto summary = polarity::pooled_summary(series);
            return distest::running_variance_test(series, window, summary.var_pF);
        }
    }
    throw ContractViolation("invalid test kind");
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Run one replicate per index across a small thread pool; results land in
// per-replicate slots so scheduling cannot affect the outcome.
template <typename Fn>
void parallel_replicates(int replicates, int threads, Fn&& body) {
    const int workers = std::min(resolve_threads(threads), std::max(replicates, 1));
    if (workers <= 1) {
        for (int r = 0; r < replicates; ++r) body(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&] {
            for (int r = next.fetch_add(1); r < replicates; r = next.fetch_add(1)) body(r);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace

CalibrationResult calibrate_type1(TestKind test, const ScenarioConfig& null_config,
                                  int replicates, const distest::MultinomialTestConfig& cfg,
                                  int window, int threads) {
    if (null_config.trajectory.kind != PolarityTrajectory::Kind::Constant)
        throw ContractViolation("calibrate_type1: null config must have a constant trajectory");
    if (replicates < 1) throw ContractViolation("calibrate_type1: replicates must be >= 1");

    std::vector<std::array<double, 3>> fractions(replicates);
    std::vector<std::size_t> tested(replicates);
    parallel_replicates(replicates, threads, [&](int r) {
        ScenarioConfig rep_cfg = null_config;
        rep_cfg.seed = derive_seed(null_config.seed, static_cast<std::uint64_t>(r));
        auto [series, ledger] = simulate_series(rep_cfg);
        auto run = run_test(test, series, cfg, window);
        tested[r] = run.summary.tested;
        for (int a = 0; a < 3; ++a)
            fractions[r][a] = run.summary.tested > 0
                                  ? static_cast<double>(run.summary.significant[a]) /
                                        static_cast<double>(run.summary.tested)
                                  : 0.0;
    });

    CalibrationResult result;
    result.test = test;
    result.replicates = replicates;
    for (std::size_t r = 0; r < tested.size(); ++r) result.tested_days_total += tested[r];
    for (int a = 0; a < 3; ++a) {
        double mean = 0;
        for (int r = 0; r < replicates; ++r) mean += fractions[r][a];
        mean /= replicates;
        double ss = 0;
        for (int r = 0; r < replicates; ++r)
            ss += (fractions[r][a] - mean) * (fractions[r][a] - mean);
        const double se = replicates > 1 ? std::sqrt(ss / (replicates - 1) / replicates) : 0.0;
        result.levels[a] = {distest::kAlphas[a], mean, mean - 1.96 * se, mean + 1.96 * se};
    }
    return result;
}

PowerResult power_study(TestKind test, const ScenarioConfig& alternative, int replicates,
                        int detect_days, const distest::MultinomialTestConfig& cfg, int window,
                        int threads) {
    if (alternative.trajectory.kind != PolarityTrajectory::Kind::ChangePoint)
        throw ContractViolation("power_study: alternative config must have a change point");
    if (replicates < 1) throw ContractViolation("power_study: replicates must be >= 1");

    const int change_day = alternative.trajectory.change_day;
    const Date change_date = alternative.start_date + change_day;
    const Date detect_end = change_date + detect_days;

    struct RepCounts {
        std::array<std::int64_t, 3> in_window{};
        std::array<std::int64_t, 3> total_flags{};
        std::int64_t window_days = 0;
    };
    std::vector<RepCounts> counts(replicates);
    parallel_replicates(replicates, threads, [&](int r) {
        ScenarioConfig rep_cfg = alternative;
        rep_cfg.seed = derive_seed(alternative.seed, static_cast<std::uint64_t>(r));
        auto [series, ledger] = simulate_series(rep_cfg);
        auto run = run_test(test, series, cfg, window);
        auto& c = counts[r];
        for (const auto& o : run.outcomes) {
            const bool inside = !(o.date < change_date) && o.date < detect_end;
            c.window_days += inside;
            for (int a = 0; a < 3; ++a) {
                if (!o.significant(distest::kAlphas[a])) continue;
                ++c.total_flags[a];
                if (inside) ++c.in_window[a];
            }
        }
    });

    PowerResult result;
    result.test = test;
    result.replicates = replicates;
    result.change_day = change_day;
    result.detect_days = detect_days;
    for (int a = 0; a < 3; ++a) {
        std::int64_t in_window = 0, total_flags = 0, window_days = 0, detected = 0;
        for (const auto& c : counts) {
            in_window += c.in_window[a];
            total_flags += c.total_flags[a];
            window_days += c.window_days;
            detected += c.in_window[a] > 0;
        }
        result.levels[a].alpha = distest::kAlphas[a];
        result.levels[a].detection_fraction =
            window_days > 0 ? static_cast<double>(in_window) / static_cast<double>(window_days)
                            : 0.0;
        result.levels[a].detection_probability =
            static_cast<double>(detected) / static_cast<double>(replicates);
        result.levels[a].localization =
            total_flags > 0 ? static_cast<double>(in_window) / static_cast<double>(total_flags)
                            : 0.0;
    }
    return result;
}

// ----------------------------------------------------------------------------
// JSON serialization
// ----------------------------------------------------------------------------

std::string ScenarioConfig::to_json() const {
    json j;
    j["days"] = days;
    j["start_date"] = start_date.to_string();
    j["seed"] = seed;
    j["p_ooc"] = p_ooc;
    j["duplicate_fraction"] = duplicate_fraction;
    j["volume"] = {{"base_rate", volume.base_rate},
                   {"overdispersion", volume.overdispersion}};
    auto& spikes = j["volume"]["spikes"] = json::array();
    for (const auto& s : volume.spikes)
        spikes.push_back({{"day", s.day}, {"multiplier", s.multiplier}});
    switch (trajectory.kind) {
        case PolarityTrajectory::Kind::Constant:
            j["trajectory"] = {{"kind", "constant"},
                               {"p", {trajectory.p_const[0], trajectory.p_const[1],
                                      trajectory.p_const[2]}}};
            break;
        case PolarityTrajectory::Kind::ChangePoint:
            j["trajectory"] = {{"kind", "change-point"},
                               {"change_day", trajectory.change_day},
                               {"p_before", {trajectory.p_before[0], trajectory.p_before[1],
                                             trajectory.p_before[2]}},
                               {"p_after", {trajectory.p_after[0], trajectory.p_after[1],
                                            trajectory.p_after[2]}}};
            break;
        case PolarityTrajectory::Kind::Parabolic:
            j["trajectory"] = {{"kind", "parabolic"},
                               {"peak_day", trajectory.peak_day},
                               {"peak_value", trajectory.peak_value},
                               {"end_value", trajectory.end_value},
                               {"contrary_share", trajectory.contrary_share}};
            break;
    }
    j["text"] = {{"markers_per_post", text.markers_per_post},
                 {"noise_per_post", text.noise_per_post},
                 {"noise_tokens", text.noise_tokens}};
    auto& markers = j["text"]["class_markers"] = json::object();
    for (int c = 0; c < classify::kNumClasses; ++c)
        markers[classify::label_code(static_cast<classify::PolarityLabel>(c))] =
            text.class_markers[c];
    return j.dump(2);
}

ScenarioConfig ScenarioConfig::from_json(std::string_view payload) {
    json j = json::parse(payload);
    ScenarioConfig cfg;
    cfg.days = j.at("days").get<int>();
    if (j.contains("start_date")) {
        auto d = Date::from_string(j["start_date"].get<std::string>());
        if (!d) throw ContractViolation("scenario: bad start_date");
        cfg.start_date = *d;
    }
    cfg.seed = j.value("seed", 0ull);
    cfg.p_ooc = j.value("p_ooc", 0.0);
    cfg.duplicate_fraction = j.value("duplicate_fraction", 0.0);
    if (j.contains("volume")) {
        const auto& v = j["volume"];
        cfg.volume.base_rate = v.value("base_rate", cfg.volume.base_rate);
        cfg.volume.overdispersion = v.value("overdispersion", cfg.volume.overdispersion);
        if (v.contains("spikes"))
            for (const auto& s : v["spikes"])
                cfg.volume.spikes.push_back(
                    {s.at("day").get<int>(), s.at("multiplier").get<double>()});
    }
    if (j.contains("trajectory")) {
        const auto& t = j["trajectory"];
        const auto kind = t.at("kind").get<std::string>();
        if (kind == "constant") {
            cfg.trajectory.kind = PolarityTrajectory::Kind::Constant;
            const auto& p = t.at("p");
            for (int i = 0; i < 3; ++i) cfg.trajectory.p_const[i] = p.at(i).get<double>();
        } else if (kind == "change-point") {
            cfg.trajectory.kind = PolarityTrajectory::Kind::ChangePoint;
            cfg.trajectory.change_day = t.at("change_day").get<int>();
            for (int i = 0; i < 3; ++i) {
                cfg.trajectory.p_before[i] = t.at("p_before").at(i).get<double>();
                cfg.trajectory.p_after[i] = t.at("p_after").at(i).get<double>();
            }
        } else if (kind == "parabolic") {
            cfg.trajectory.kind = PolarityTrajectory::Kind::Parabolic;
            cfg.trajectory.peak_day = t.at("peak_day").get<double>();
            cfg.trajectory.peak_value = t.at("peak_value").get<double>();
            cfg.trajectory.end_value = t.at("end_value").get<double>();
            cfg.trajectory.contrary_share = t.value("contrary_share", 0.548);
        } else {
            throw ContractViolation("scenario: unknown trajectory kind: " + kind);
        }
    }
    cfg.text = TextModel::default_markers();
    if (j.contains("text")) {
        const auto& t = j["text"];
        cfg.text.markers_per_post = t.value("markers_per_post", cfg.text.markers_per_post);
        cfg.text.noise_per_post = t.value("noise_per_post", cfg.text.noise_per_post);
        if (t.contains("noise_tokens"))
            cfg.text.noise_tokens = t["noise_tokens"].get<std::vector<std::string>>();
        if (t.contains("class_markers"))
            for (int c = 0; c < classify::kNumClasses; ++c) {
                const auto code = classify::label_code(static_cast<classify::PolarityLabel>(c));
                if (t["class_markers"].contains(code))
                    cfg.text.class_markers[c] =
                        t["class_markers"][code].get<std::vector<std::string>>();
            }
    }
    return cfg;
}

ScenarioConfig ScenarioConfig::paper_shaped(std::uint64_t seed) {
    ScenarioConfig cfg;
    cfg.days = 365;
    cfg.start_date = Date::from_ymd(2018, 1, 1);
    cfg.seed = seed;
    cfg.volume.base_rate = 400;
    cfg.volume.overdispersion = 0.05;
    // the three main interaction peaks: June 22, August 4, September 5
    cfg.volume.spikes = {{172, 20.0}, {215, 25.0}, {247, 15.0}};
    cfg.trajectory.kind = PolarityTrajectory::Kind::Parabolic;
    cfg.trajectory.peak_day = 140;
    cfg.trajectory.peak_value = 0.76;
    cfg.trajectory.end_value = 0.69;
    cfg.trajectory.contrary_share = 0.548;
    cfg.text = TextModel::default_markers();
    cfg.p_ooc = 0.30;
    cfg.duplicate_fraction = 0.02;
    return cfg;
}

std::string ScenarioLedger::to_json() const {
    json j;
    j["unique_posts"] = unique_posts;
    j["planted_duplicates"] = planted_duplicates;
    if (change_day) j["change_day"] = *change_day;
    if (planted_peak_day) j["planted_peak_day"] = *planted_peak_day;
    if (planted_decline) j["planted_decline"] = *planted_decline;
    auto& spikes_json = j["spikes"] = json::array();
    for (const auto& s : spikes) spikes_json.push_back({{"day", s.day}, {"multiplier", s.multiplier}});
    auto& days_json = j["days"] = json::array();
    for (const auto& d : days) {
        days_json.push_back({{"date", d.date.to_string()},
                             {"p", {d.p[0], d.p[1], d.p[2]}},
                             {"n_total", d.n_total},
                             {"spike", d.spike}});
    }
    return j.dump(2);
}

std::string CalibrationResult::to_json() const {
    json j;
    j["test"] = test_kind_name(test);
    j["replicates"] = replicates;
    j["tested_days_total"] = tested_days_total;
    auto& levels_json = j["levels"] = json::array();
    for (const auto& lv : levels)
        levels_json.push_back({{"alpha", lv.alpha},
                               {"mean_flagged_fraction", lv.mean_fraction},
                               {"ci_lower", lv.ci_lower},
                               {"ci_upper", lv.ci_upper}});
    return j.dump(2);
}

std::string PowerResult::to_json() const {
    json j;
    j["test"] = test_kind_name(test);
    j["replicates"] = replicates;
    j["change_day"] = change_day;
    j["detect_days"] = detect_days;
    auto& levels_json = j["levels"] = json::array();
    for (const auto& lv : levels)
        levels_json.push_back({{"alpha", lv.alpha},
                               {"detection_fraction", lv.detection_fraction},
                               {"detection_probability", lv.detection_probability},
                               {"localization", lv.localization}});
    return j.dump(2);
}

}  // namespace vaxpulse::sim

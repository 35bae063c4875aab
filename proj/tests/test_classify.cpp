#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vaxpulse/classify.hpp"
#include "vaxpulse/textprep.hpp"

using namespace vaxpulse;
using namespace vaxpulse::classify;

namespace {

text::FeatureVector fv(std::initializer_list<std::pair<std::uint32_t, std::uint32_t>> entries) {
    text::FeatureVector v;
    v.entries.assign(entries.begin(), entries.end());
    return v;
}

LabeledPost post(const std::string& id, PolarityLabel label,
                 std::initializer_list<std::pair<std::uint32_t, std::uint32_t>> entries) {
    return {id, fv(entries), label};
}

// four-class corpus with class-exclusive marker features plus shared noise
std::vector<LabeledPost> marker_corpus(std::size_t per_class, std::size_t vocab_size,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<LabeledPost> data;
    std::uniform_int_distribution<std::uint32_t> noise(8, static_cast<std::uint32_t>(vocab_size - 1));
    for (std::size_t i = 0; i < per_class; ++i) {
        for (int c = 0; c < kNumClasses; ++c) {
            std::map<std::uint32_t, std::uint32_t> counts;
            counts[static_cast<std::uint32_t>(2 * c)] = 1 + (i % 2);
            counts[static_cast<std::uint32_t>(2 * c + 1)] = 1;
            for (int k = 0; k < 3; ++k) ++counts[noise(rng)];
            text::FeatureVector v;
            v.entries.assign(counts.begin(), counts.end());
            data.push_back({"p" + std::to_string(data.size()), std::move(v),
                            static_cast<PolarityLabel>(c)});
        }
    }
    return data;
}

double svm_objective(const LinearModel& m, const std::vector<LabeledPost>& data, double reg) {
    double obj = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        double norm2 = 0;
        for (double w : m.weights[c]) norm2 += w * w;
        double hinge = 0;
        for (const auto& p : data) {
            double s = m.bias[c];
            for (auto [idx, count] : p.features.entries) s += m.weights[c][idx] * count;
            const double y = p.label == static_cast<PolarityLabel>(c) ? 1.0 : -1.0;
            hinge += std::max(0.0, 1.0 - y * s);
        }
        obj += reg / 2 * norm2 + hinge / static_cast<double>(data.size());
    }
    return obj;
}

}  // namespace

TEST_SUITE_BEGIN("classify");

TEST_CASE("svm separates disjoint-vocabulary classes perfectly") {
    std::vector<LabeledPost> data;
    for (int i = 0; i < 10; ++i) {
        data.push_back(post("a" + std::to_string(i), PolarityLabel::Favourable,
                            {{0u, 2u}, {1u, 1u}}));
        data.push_back(post("b" + std::to_string(i), PolarityLabel::Contrary,
                            {{2u, 2u}, {3u, 1u}}));
    }
    auto model = train_svm(data, 4, {30, 1e-3}, 42);
    for (const auto& p : data) CHECK(model.predict(p.features) == p.label);
}

TEST_CASE("svm training is deterministic, also on duplicated data") {
    auto data = marker_corpus(10, 16, 3);
    std::vector<LabeledPost> doubled = data;
    doubled.insert(doubled.end(), data.begin(), data.end());
    auto m1 = train_svm(doubled, 16, {5, 1e-3}, 7);
    auto m2 = train_svm(doubled, 16, {5, 1e-3}, 7);
    CHECK(m1.to_json() == m2.to_json());
    auto m3 = train_svm(doubled, 16, {5, 1e-3}, 8);
    CHECK(m1.to_json() != m3.to_json());
}

TEST_CASE("svm rejects single-class data") {
    std::vector<LabeledPost> data = {post("a", PolarityLabel::Favourable, {{0u, 1u}}),
                                     post("b", PolarityLabel::Favourable, {{1u, 1u}})};
    CHECK_THROWS_AS(train_svm(data, 2, {5, 1e-3}, 1), DegenerateTraining);
}

TEST_CASE("svm reaches high held-out accuracy on marker corpus") {
    auto train_data = marker_corpus(60, 16, 11);
    auto held_out = marker_corpus(20, 16, 12);
    auto model = train_svm(train_data, 16, {10, 1e-2}, 13);
    std::size_t hits = 0;
    for (const auto& p : held_out) hits += model.predict(p.features) == p.label;
    CHECK(static_cast<double>(hits) / static_cast<double>(held_out.size()) >= 0.95);
}

TEST_CASE("svm objective is non-increasing across epochs on a small instance") {
    auto data = marker_corpus(8, 16, 21);
    const double reg = 1e-2;
    double prev = std::numeric_limits<double>::infinity();
    for (int epochs = 1; epochs <= 6; ++epochs) {
        auto m = train_svm(data, 16, {epochs, reg}, 5);
        const double obj = svm_objective(m, data, reg);
        CHECK(obj <= prev + 1e-9);
        prev = obj;
    }
}

TEST_CASE("naive bayes: one doc per class with disjoint tokens") {
    std::vector<LabeledPost> data;
    for (int c = 0; c < kNumClasses; ++c)
        data.push_back(post("d" + std::to_string(c), static_cast<PolarityLabel>(c),
                            {{static_cast<std::uint32_t>(c), 3u}}));
    auto model = train_nb(data, 4, 0.5);
    for (const auto& p : data) CHECK(model.predict(p.features) == p.label);
}

TEST_CASE("naive bayes: exact score tie breaks to Favourable") {
    // empty feature vector leaves only the priors, which are exactly equal
    std::vector<LabeledPost> data;
    for (int c = 0; c < kNumClasses; ++c)
        data.push_back(post("d" + std::to_string(c), static_cast<PolarityLabel>(c),
                            {{static_cast<std::uint32_t>(c), 1u}}));
    auto model = train_nb(data, 4, 1.0);
    auto scores = model.scores(fv({}));
    for (int c = 1; c < kNumClasses; ++c) CHECK(scores[c] == scores[0]);
    CHECK(model.predict(fv({})) == PolarityLabel::Favourable);
}

TEST_CASE("naive bayes log-posteriors match hand arithmetic") {
    // two classes, three tokens; F doc = (2,1,0), C doc = (0,1,2); alpha = 1
    std::vector<LabeledPost> data = {post("f", PolarityLabel::Favourable, {{0u, 2u}, {1u, 1u}}),
                                     post("c", PolarityLabel::Contrary, {{1u, 1u}, {2u, 2u}})};
    auto model = train_nb(data, 3, 1.0);
    // P(w|F): (2+1)/(3+3), (1+1)/(3+3), (0+1)/(3+3); prior 1/2
    auto query = fv({{0u, 1u}, {2u, 1u}});
    auto scores = model.scores(query);
    const double expected_f = std::log(0.5) + std::log(3.0 / 6.0) + std::log(1.0 / 6.0);
    const double expected_c = std::log(0.5) + std::log(1.0 / 6.0) + std::log(3.0 / 6.0);
    CHECK(scores[0] == doctest::Approx(expected_f).epsilon(1e-12));
    CHECK(scores[1] == doctest::Approx(expected_c).epsilon(1e-12));
}

TEST_CASE("naive bayes agrees with brute-force Bayes on small vocabularies") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> count_dist(0, 3);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t vocab = 5;
        std::vector<LabeledPost> data;
        for (int d = 0; d < 8; ++d) {
            std::map<std::uint32_t, std::uint32_t> counts;
            for (std::uint32_t t = 0; t < vocab; ++t) {
                int c = count_dist(rng);
                if (c > 0) counts[t] = static_cast<std::uint32_t>(c);
            }
            if (counts.empty()) counts[0] = 1;
            text::FeatureVector v;
            v.entries.assign(counts.begin(), counts.end());
            data.push_back({"d" + std::to_string(d), std::move(v),
                            d % 2 == 0 ? PolarityLabel::Favourable : PolarityLabel::Contrary});
        }
        const double alpha = 0.7;
        auto model = train_nb(data, vocab, alpha);

        // brute force: direct probability computation without logs
        auto query_counts = std::vector<int>{count_dist(rng), count_dist(rng), count_dist(rng),
                                             count_dist(rng), count_dist(rng)};
        std::map<std::uint32_t, std::uint32_t> qmap;
        for (std::uint32_t t = 0; t < vocab; ++t)
            if (query_counts[t] > 0) qmap[t] = static_cast<std::uint32_t>(query_counts[t]);
        text::FeatureVector query;
        query.entries.assign(qmap.begin(), qmap.end());

        std::array<double, 2> posterior{};
        for (int c = 0; c < 2; ++c) {
            double token_total = 0;
            std::vector<double> token_counts(vocab, 0.0);
            double docs = 0;
            for (const auto& p : data) {
                if (static_cast<int>(p.label) != c) continue;
                docs += 1;
                for (auto [idx, count] : p.features.entries) {
                    token_counts[idx] += count;
                    token_total += count;
                }
            }
            double prob = docs / static_cast<double>(data.size());
            for (std::uint32_t t = 0; t < vocab; ++t)
                prob *= std::pow((token_counts[t] + alpha) /
                                     (token_total + alpha * static_cast<double>(vocab)),
                                 query_counts[t]);
            posterior[c] = prob;
        }
        auto predicted = model.predict(query);
        auto expected = posterior[0] >= posterior[1] ? PolarityLabel::Favourable
                                                     : PolarityLabel::Contrary;
        CHECK(predicted == expected);
        auto scores = model.scores(query);
        CHECK(scores[0] == doctest::Approx(std::log(posterior[0])).epsilon(1e-12));
        CHECK(scores[1] == doctest::Approx(std::log(posterior[1])).epsilon(1e-12));
    }
}

TEST_CASE("adding a constant to every class score keeps the argmax") {
    auto data = marker_corpus(5, 16, 31);
    auto model = train_nb(data, 16, 1.0);
    auto shifted = model;
    for (int c = 0; c < kNumClasses; ++c) shifted.bias[c] += 3.25;
    for (const auto& p : data) CHECK(model.predict(p.features) == shifted.predict(p.features));
}

TEST_CASE("knn basics") {
    std::vector<LabeledPost> train = {
        post("a", PolarityLabel::Favourable, {{0u, 1u}}),
        post("b", PolarityLabel::Contrary, {{1u, 1u}}),
        post("c", PolarityLabel::Contrary, {{1u, 2u}, {2u, 1u}}),
    };
    CHECK(predict_knn(train, fv({{0u, 3u}}), 1) == PolarityLabel::Favourable);
    // k = |train| with a Contrary majority: majority wins regardless of query
    CHECK(predict_knn(train, fv({{0u, 3u}}), 3) == PolarityLabel::Contrary);
    CHECK_THROWS_AS(predict_knn(train, fv({}), 2), ContractViolation);
    CHECK_THROWS_AS(predict_knn({}, fv({}), 1), ContractViolation);
}

TEST_CASE("knn matches an exhaustive sort oracle") {
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<int> count_dist(0, 4);
    auto random_fv = [&] {
        std::map<std::uint32_t, std::uint32_t> counts;
        for (std::uint32_t t = 0; t < 6; ++t) {
            int c = count_dist(rng);
            if (c > 0) counts[t] = static_cast<std::uint32_t>(c);
        }
        text::FeatureVector v;
        v.entries.assign(counts.begin(), counts.end());
        return v;
    };
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<LabeledPost> train;
        for (int i = 0; i < 9; ++i)
            train.push_back({"t" + std::to_string(i), random_fv(),
                             static_cast<PolarityLabel>(i % kNumClasses)});
        auto query = random_fv();
        const int k = 3;

        // oracle: full cosine sort (stable), majority with smallest-class ties
        std::vector<std::pair<double, std::size_t>> sims;
        for (std::size_t i = 0; i < train.size(); ++i) {
            double dot = 0, na = 0, nb = 0;
            std::vector<double> dense_q(6, 0), dense_t(6, 0);
            for (auto [idx, c] : query.entries) dense_q[idx] = c;
            for (auto [idx, c] : train[i].features.entries) dense_t[idx] = c;
            for (int t = 0; t < 6; ++t) {
                dot += dense_q[t] * dense_t[t];
                na += dense_q[t] * dense_q[t];
                nb += dense_t[t] * dense_t[t];
            }
            const double denom = std::sqrt(na) * std::sqrt(nb);
            sims.emplace_back(denom > 0 ? dot / denom : 0.0, i);
        }
        std::stable_sort(sims.begin(), sims.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::array<int, kNumClasses> votes{};
        for (int i = 0; i < k; ++i) ++votes[static_cast<int>(train[sims[i].second].label)];
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c)
            if (votes[c] > votes[best]) best = c;

        CHECK(predict_knn(train, query, k) == static_cast<PolarityLabel>(best));
    }
}

TEST_CASE("evaluate reproduces the reference arithmetic") {
    // per-class F1 from P and R
    CHECK(f1_from_pr(0.43, 0.46) == doctest::Approx(2 * 0.43 * 0.46 / 0.89));
    CHECK(std::round(f1_from_pr(0.43, 0.46) * 100) / 100 == doctest::Approx(0.44));
    // weighted average from four class F1 values and supports
    const double weighted =
        weighted_average({0.44, 0.21, 0.17, 0.65}, {785, 318, 299, 1460});
    CHECK(std::abs(weighted - 0.49) < 0.005);
}

TEST_CASE("evaluate on a constructed confusion matrix") {
    // class F: TP=1978, FP=2622, FN=2322 gives P=0.43, R=0.46 exactly
    std::vector<PolarityLabel> pred, truth;
    auto add = [&](PolarityLabel p, PolarityLabel t, int n) {
        for (int i = 0; i < n; ++i) {
            pred.push_back(p);
            truth.push_back(t);
        }
    };
    add(PolarityLabel::Favourable, PolarityLabel::Favourable, 1978);
    add(PolarityLabel::Favourable, PolarityLabel::Contrary, 2622);
    add(PolarityLabel::Contrary, PolarityLabel::Favourable, 2322);
    add(PolarityLabel::Contrary, PolarityLabel::Contrary, 1000);
    auto report = evaluate(pred, truth);
    CHECK(report.per_class[0].precision == doctest::Approx(0.43));
    CHECK(report.per_class[0].recall == doctest::Approx(0.46));
    CHECK(report.per_class[0].f1 == doctest::Approx(f1_from_pr(0.43, 0.46)));
}

TEST_CASE("evaluate: perfect predictions give all ones") {
    std::vector<PolarityLabel> labels = {PolarityLabel::Favourable, PolarityLabel::Contrary,
                                         PolarityLabel::Undecided, PolarityLabel::OutOfContext,
                                         PolarityLabel::Favourable};
    auto report = evaluate(labels, labels);
    CHECK(report.accuracy == 1.0);
    for (const auto& m : report.per_class) {
        if (m.support == 0) continue;
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    CHECK(report.weighted_avg.f1 == 1.0);
}

TEST_CASE("evaluate contract and range checks") {
    std::vector<PolarityLabel> a = {PolarityLabel::Favourable};
    std::vector<PolarityLabel> b = {PolarityLabel::Favourable, PolarityLabel::Contrary};
    CHECK_THROWS_AS(evaluate(a, b), ContractViolation);

    // micro-averaged recall equals accuracy
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<PolarityLabel> pred, truth;
    for (int i = 0; i < 200; ++i) {
        pred.push_back(static_cast<PolarityLabel>(lab(rng)));
        truth.push_back(static_cast<PolarityLabel>(lab(rng)));
    }
    auto report = evaluate(pred, truth);
    double micro_recall_num = 0;
    for (const auto& m : report.per_class) micro_recall_num += m.recall * m.support;
    CHECK(micro_recall_num / static_cast<double>(report.total) ==
          doctest::Approx(report.accuracy));
    for (const auto& m : report.per_class) {
        CHECK(m.precision >= 0);
        CHECK(m.precision <= 1);
        CHECK(m.recall >= 0);
        CHECK(m.recall <= 1);
    }
}

TEST_CASE("model_select: stratification error on tiny classes") {
    std::vector<LabeledPost> data;
    for (int c = 0; c < kNumClasses; ++c)
        data.push_back(post("d" + std::to_string(c), static_cast<PolarityLabel>(c),
                            {{static_cast<std::uint32_t>(c), 1u}}));
    CHECK_THROWS_AS(model_select(data, 4, 2, {Algorithm::NaiveBayes}, 1), StratificationError);
}

TEST_CASE("model_select is deterministic and picks a near-perfect model") {
    auto data = marker_corpus(20, 16, 77);
    std::set<Algorithm> algos = {Algorithm::Svm, Algorithm::NaiveBayes, Algorithm::Knn};
    auto s1 = model_select(data, 16, 4, algos, 123);
    auto s2 = model_select(data, 16, 4, algos, 123);
    CHECK(s1.best == s2.best);
    REQUIRE(s1.reports.size() == 3);
    for (const auto& [algo, report] : s1.reports) {
        CHECK(report.weighted_avg.f1 == s2.reports.at(algo).weighted_avg.f1);
    }
    CHECK(s1.reports.at(s1.best).weighted_avg.f1 >= 0.9);
}

TEST_CASE("model json round trip preserves predictions") {
    auto data = marker_corpus(10, 16, 5);
    auto model = train_svm(data, 16, {5, 1e-3}, 2);
    auto back = LinearModel::from_json(model.to_json());
    for (const auto& p : data) CHECK(model.predict(p.features) == back.predict(p.features));
}

TEST_CASE("labels csv round trip") {
    std::vector<std::pair<std::string, PolarityLabel>> rows = {
        {"1", PolarityLabel::Favourable},
        {"2", PolarityLabel::OutOfContext},
        {"3", PolarityLabel::Undecided},
    };
    std::ostringstream out;
    write_labels_csv(out, rows);
    std::istringstream in(out.str());
    CHECK(read_labels_csv(in) == rows);
    std::istringstream bad("post_id,label\nx,Q\n");
    CHECK_THROWS_AS(read_labels_csv(bad), ContractViolation);
}

TEST_SUITE_END();
